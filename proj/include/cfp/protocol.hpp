#pragma once

// Gallery/probe protocols over a dataset manifest, model training on the
// gallery side, and scoring of the probe side.

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "cfp/bundle.hpp"
#include "cfp/coding.hpp"
#include "cfp/config.hpp"
#include "cfp/descriptors.hpp"
#include "cfp/dictionary_learning.hpp"
#include "cfp/discriminative.hpp"
#include "cfp/evaluation.hpp"
#include "cfp/pressure_image.hpp"
#include "cfp/random.hpp"
#include "cfp/representation.hpp"

namespace cfp {

inline bool is_shoe(Footwear f) { return f != Footwear::barefoot; }

struct ProtocolSplit {
  std::vector<ManifestEntry> gallery;
  std::vector<ManifestEntry> probes;
  std::vector<int> gallery_sessions;
};

/// Sessions are shuffled with `seed` and split in half (the gallery gets the
/// extra one when the count is odd). The gallery takes register-condition
/// images from its sessions, the probes take test-condition images from the
/// other sessions, so no capture is on both sides.
inline ProtocolSplit split_protocol(const DatasetManifest& manifest, Protocol protocol, std::uint64_t seed) {
  std::vector<int> sessions;
  for (const auto& e : manifest.entries) sessions.push_back(e.session);
  std::sort(sessions.begin(), sessions.end());
  sessions.erase(std::unique(sessions.begin(), sessions.end()), sessions.end());
  if (sessions.size() < 2) throw DataError("protocol split needs at least two sessions per condition");
  Rng rng(derive_seed(seed, 0x5e55));
  rng.shuffle(sessions);
  const auto n_gallery = (sessions.size() + 1) / 2;
  std::vector<int> gallery_sessions(sessions.begin(), sessions.begin() + static_cast<std::ptrdiff_t>(n_gallery));
  std::sort(gallery_sessions.begin(), gallery_sessions.end());

  const bool register_shoe = protocol == Protocol::shoe_shoe;
  const bool test_shoe = protocol != Protocol::bare_bare;
  ProtocolSplit split;
  split.gallery_sessions = gallery_sessions;
  for (const auto& e : manifest.entries) {
    const bool in_gallery_session = std::binary_search(gallery_sessions.begin(), gallery_sessions.end(), e.session);
    if (in_gallery_session && is_shoe(e.footwear) == register_shoe) split.gallery.push_back(e);
    if (!in_gallery_session && is_shoe(e.footwear) == test_shoe) split.probes.push_back(e);
  }
  if (split.gallery.empty() || split.probes.empty()) throw DataError("protocol split is empty for this manifest");
  return split;
}

inline std::vector<PressureImage> load_entries(const DatasetManifest& manifest, const std::vector<ManifestEntry>& entries) {
  std::vector<PressureImage> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(load_entry(manifest, e));
  return out;
}

inline std::string method_tag(const PipelineConfig& config) {
  if (config.method == Method::pca_lda) return "PCA+LDA";
  switch (config.coder) {
    case Coder::SC: return "SC+LDA";
    case Coder::LLC: return "LLC+LDA";
    case Coder::HLSC: return "DHSC";
  }
  return "DHSC";
}

/// Raw pixels scaled to unit L2 norm (the PCA baseline's input).
inline Eigen::VectorXd pixel_feature(const PressureImage& image) {
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(image.pressure.data(), static_cast<Eigen::Index>(image.pressure.size()));
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

/// Pre-LDA image feature for a trained bundle.
inline Eigen::VectorXd image_feature(const ModelBundle& bundle, const PressureImage& image) {
  image.validate();
  if (bundle.config.method == Method::pca_lda) return pca_project(*bundle.pca, pixel_feature(image));
  return build_representation(image, *bundle.dictionary, bundle.config, bundle.centers).feature;
}

inline Eigen::MatrixXd image_features(const ModelBundle& bundle, const std::vector<PressureImage>& images) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), bundle.feature_dim());
  for (std::size_t i = 0; i < images.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = image_feature(bundle, images[i]).transpose();
  return out;
}

/// Descriptors of every non-uniform patch, as columns.
inline Eigen::MatrixXd collect_descriptors(const std::vector<PressureImage>& images, const PipelineConfig& config) {
  std::vector<Eigen::MatrixXd> fields;
  Eigen::Index total = 0;
  for (const auto& img : images) {
    const auto f = extract_dense_descriptors(img, config.stride, config.cell);
    Eigen::MatrixXd live(kDescriptorDim, f.size());
    Eigen::Index k = 0;
    for (int i = 0; i < f.size(); ++i)
      if (!is_zero_descriptor(f.descriptors.col(i))) live.col(k++) = f.descriptors.col(i);
    fields.push_back(live.leftCols(k));
    total += k;
  }
  Eigen::MatrixXd all(kDescriptorDim, total);
  Eigen::Index off = 0;
  for (const auto& f : fields) {
    all.middleCols(off, f.cols()) = f;
    off += f.cols();
  }
  return all;
}

/// Up to `limit` columns drawn without replacement, kept in original order.
inline Eigen::MatrixXd sample_columns(const Eigen::MatrixXd& m, int limit, std::uint64_t seed) {
  if (m.cols() <= limit) return m;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, 0x5a371e));
  rng.shuffle(idx);
  idx.resize(static_cast<std::size_t>(limit));
  std::sort(idx.begin(), idx.end());
  Eigen::MatrixXd out(m.rows(), limit);
  for (int i = 0; i < limit; ++i) out.col(i) = m.col(idx[static_cast<std::size_t>(i)]);
  return out;
}

/// Class ids follow the sorted subject ids.
inline std::vector<int> class_labels(const std::vector<std::string>& subjects, const std::vector<std::string>& ids) {
  std::vector<int> labels;
  labels.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = std::lower_bound(subjects.begin(), subjects.end(), id);
    labels.push_back(it != subjects.end() && *it == id ? static_cast<int>(it - subjects.begin()) : -1);
  }
  return labels;
}

/// Fits every model of the pipeline on gallery images only. The pre-LDA
/// gallery features are handed back through `features_out` when given.
inline ModelBundle train_bundle(const std::vector<PressureImage>& gallery, const PipelineConfig& config,
                                Eigen::MatrixXd* features_out = nullptr) {
  config.validate();
  if (gallery.empty()) throw DataError("no training images");
  ModelBundle b;
  b.config = config;

  std::vector<std::string> ids;
  for (const auto& img : gallery) ids.push_back(img.subject_id);
  b.subjects = ids;
  std::sort(b.subjects.begin(), b.subjects.end());
  b.subjects.erase(std::unique(b.subjects.begin(), b.subjects.end()), b.subjects.end());
  if (b.subjects.size() < 2) throw DataError("training needs at least two subjects");
  const auto labels = class_labels(b.subjects, ids);

  Eigen::MatrixXd features;
  if (config.method == Method::dhsc) {
    const Eigen::MatrixXd descriptors = collect_descriptors(gallery, config);
    if (descriptors.cols() < config.n_atoms) throw DataError("not enough non-uniform patches to learn the dictionary");
    DictionaryLearningOptions opt;
    opt.n_atoms = config.n_atoms;
    opt.lambda = config.lambda;
    opt.max_outer = config.dict_iterations;
    opt.init_iterations = config.dict_init_iterations;
    opt.seed = derive_seed(config.seed, 0xd1c);
    b.dictionary = learn_dictionary(sample_columns(descriptors, config.dict_samples, config.seed), opt).dictionary;
    if (config.coder == Coder::HLSC && config.hlsc_centers == CenterMode::global) {
      const Eigen::MatrixXd sample = sample_columns(descriptors, config.dict_samples, derive_seed(config.seed, 1));
      Eigen::MatrixXd codes(config.n_atoms, sample.cols());
      for (Eigen::Index i = 0; i < sample.cols(); ++i) codes.col(i) = llc_encode(sample.col(i), *b.dictionary, config.lambda);
      b.centers = fit_gaussian_centers(codes, std::min<int>(config.hlsc_k, static_cast<int>(codes.cols())), config.seed);
    }
    features = image_features(b, gallery);
  } else {
    Eigen::MatrixXd pixels(static_cast<Eigen::Index>(gallery.size()),
                           static_cast<Eigen::Index>(gallery.front().pressure.size()));
    for (std::size_t i = 0; i < gallery.size(); ++i) {
      if (gallery[i].pressure.size() != gallery.front().pressure.size())
        throw DataError("PCA baseline needs images of identical size");
      pixels.row(static_cast<Eigen::Index>(i)) = pixel_feature(gallery[i]).transpose();
    }
    const int q = std::min<int>({config.pca_dim, static_cast<int>(pixels.rows()) - 1, static_cast<int>(pixels.cols())});
    b.pca = fit_pca(pixels, q);
    features = pca_project_rows(*b.pca, pixels);
  }

  b.lda = fit_lda(features, labels, config.lda_dim, config.lda_shrinkage);
  b.svm = train_linear_svm(lda_project_rows(b.lda, features), labels, config.svm_c, config.seed, config.svm_epochs);
  if (features_out != nullptr) *features_out = std::move(features);
  return b;
}

inline LabeledFeatures projected_features(const ModelBundle& bundle, const std::vector<PressureImage>& images) {
  LabeledFeatures out;
  for (const auto& img : images) out.ids.push_back(img.subject_id);
  out.features = lda_project_rows(bundle.lda, image_features(bundle, images));
  return out;
}

/// Scores probes against gallery templates with the bundle's models.
/// `gallery_features` are pre-LDA features, one row per gallery image.
inline EvalReport evaluate_bundle(const ModelBundle& bundle, const std::vector<std::string>& gallery_ids,
                                  const Eigen::MatrixXd& gallery_features, const std::vector<PressureImage>& probes,
                                  Protocol protocol) {
  const LabeledFeatures g{gallery_ids, lda_project_rows(bundle.lda, gallery_features)};
  const auto p = projected_features(bundle, probes);
  auto report = far_frr_curve(verification_scores(g, p));
  report.protocol = protocol;
  report.method = method_tag(bundle.config);

  const auto labels = class_labels(bundle.subjects, p.ids);
  std::vector<Eigen::Index> enrolled;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) enrolled.push_back(static_cast<Eigen::Index>(i));
  if (!enrolled.empty()) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(enrolled.size()), p.features.cols());
    std::vector<int> known;
    for (std::size_t k = 0; k < enrolled.size(); ++k) {
      rows.row(static_cast<Eigen::Index>(k)) = p.features.row(enrolled[k]);
      known.push_back(labels[static_cast<std::size_t>(enrolled[k])]);
    }
    report.identification_accuracy = identification_accuracy(bundle.svm, rows, known);
  }
  return report;
}

inline std::vector<std::string> subject_ids(const std::vector<PressureImage>& images) {
  std::vector<std::string> ids;
  for (const auto& img : images) ids.push_back(img.subject_id);
  return ids;
}

inline EvalReport evaluate_bundle(const ModelBundle& bundle, const std::vector<PressureImage>& gallery,
                                  const std::vector<PressureImage>& probes, Protocol protocol) {
  return evaluate_bundle(bundle, subject_ids(gallery), image_features(bundle, gallery), probes, protocol);
}

struct ProtocolResult {
  EvalReport report;
  ModelBundle bundle;
};

/// Split, train on the gallery side, evaluate on the probe side.
inline ProtocolResult run_protocol(const DatasetManifest& manifest, PipelineConfig config, Protocol protocol,
                                   std::uint64_t seed) {
  config.seed = seed;
  const auto split = split_protocol(manifest, protocol, seed);
  const auto gallery = load_entries(manifest, split.gallery);
  const auto probes = load_entries(manifest, split.probes);
  ProtocolResult res;
  Eigen::MatrixXd gallery_features;
  res.bundle = train_bundle(gallery, config, &gallery_features);
  res.report = evaluate_bundle(res.bundle, subject_ids(gallery), gallery_features, probes, protocol);
  return res;
}

}  // namespace cfp
