#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfp/coding.hpp"
#include "cfp/config.hpp"
#include "cfp/descriptors.hpp"
#include "cfp/discriminative.hpp"
#include "cfp/errors.hpp"
#include "cfp/matrix_io.hpp"

namespace cfp {

// ---------------------------------------------------------------------------
// Model <-> ModelFile

namespace detail {

inline Eigen::MatrixXd as_row(const std::vector<int>& v) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

inline std::vector<int> from_row(const Eigen::MatrixXd& m) {
  if (m.rows() != 1) throw DataError("model file: expected a row vector");
  std::vector<int> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) v[static_cast<std::size_t>(i)] = static_cast<int>(m(0, i));
  return v;
}

inline void expect_kind(const ModelFile& f, std::string_view kind) {
  if (f.get("kind") != kind) throw DataError("model file: expected kind=" + std::string(kind));
}

}  // namespace detail

inline ModelFile to_model_file(const LdaModel& m) {
  ModelFile f;
  f.set("kind", "lda");
  f.set("input_dim", std::to_string(m.input_dim()));
  f.set("output_dim", std::to_string(m.output_dim()));
  f.set("shrinkage", format_double(m.shrinkage));
  f.set("clamped", m.clamped ? "1" : "0");
  f.add("projection", m.projection);
  f.add("global_mean", m.global_mean.transpose());
  f.add("eigenvalues", m.eigenvalues.transpose());
  f.add("class_means_projected", m.class_means_projected);
  f.add("classes", detail::as_row(m.classes));
  return f;
}

inline LdaModel lda_from_model_file(const ModelFile& f) {
  detail::expect_kind(f, "lda");
  LdaModel m;
  const auto p = f.get_int("input_dim");
  const auto q = f.get_int("output_dim");
  m.shrinkage = f.get_double("shrinkage");
  m.clamped = f.get("clamped") == "1";
  m.projection = f.matrix("projection");
  m.global_mean = f.matrix("global_mean").transpose();
  m.eigenvalues = f.matrix("eigenvalues").transpose();
  m.class_means_projected = f.matrix("class_means_projected");
  m.classes = detail::from_row(f.matrix("classes"));
  if (m.projection.rows() != p || m.projection.cols() != q || m.global_mean.size() != p || m.eigenvalues.size() != q ||
      m.class_means_projected.rows() != q || m.class_means_projected.cols() != static_cast<Eigen::Index>(m.classes.size()))
    throw DataError("lda model: inconsistent shapes");
  return m;
}

inline ModelFile to_model_file(const PcaModel& m) {
  ModelFile f;
  f.set("kind", "pca");
  f.set("input_dim", std::to_string(m.input_dim()));
  f.set("output_dim", std::to_string(m.output_dim()));
  f.add("projection", m.projection);
  f.add("mean", m.mean.transpose());
  f.add("explained", m.explained.transpose());
  return f;
}

inline PcaModel pca_from_model_file(const ModelFile& f) {
  detail::expect_kind(f, "pca");
  PcaModel m;
  const auto p = f.get_int("input_dim");
  const auto q = f.get_int("output_dim");
  m.projection = f.matrix("projection");
  m.mean = f.matrix("mean").transpose();
  m.explained = f.matrix("explained").transpose();
  if (m.projection.rows() != p || m.projection.cols() != q || m.mean.size() != p || m.explained.size() != q)
    throw DataError("pca model: inconsistent shapes");
  return m;
}

inline ModelFile to_model_file(const SvmModel& m) {
  ModelFile f;
  f.set("kind", "svm");
  f.set("input_dim", std::to_string(m.input_dim()));
  f.set("classes", std::to_string(m.classes.size()));
  f.set("C", format_double(m.c));
  f.add("weights", m.weights);
  f.add("bias", m.bias.transpose());
  f.add("class_ids", detail::as_row(m.classes));
  return f;
}

inline SvmModel svm_from_model_file(const ModelFile& f) {
  detail::expect_kind(f, "svm");
  SvmModel m;
  const auto q = f.get_int("input_dim");
  const auto k = f.get_int("classes");
  m.c = f.get_double("C");
  m.weights = f.matrix("weights");
  m.bias = f.matrix("bias").transpose();
  m.classes = detail::from_row(f.matrix("class_ids"));
  if (m.weights.rows() != k || m.weights.cols() != q || m.bias.size() != k ||
      static_cast<long long>(m.classes.size()) != k)
    throw DataError("svm model: inconsistent shapes");
  return m;
}

// ---------------------------------------------------------------------------
// Descriptor fields: "grid_w grid_h stride patch_size" then one row per patch.

inline std::string format_descriptor_field(const DescriptorField& field) {
  std::string out = std::to_string(field.grid_w) + ' ' + std::to_string(field.grid_h) + ' ' +
                    std::to_string(field.stride) + ' ' + std::to_string(field.patch_size) + '\n';
  append_matrix(out, field.descriptors.transpose());
  return out;
}

inline DescriptorField parse_descriptor_field(std::string_view text) {
  const auto nl = text.find('\n');
  if (nl == std::string_view::npos) throw DataError("descriptor field: missing header");
  const auto head = detail::split_spaces(text.substr(0, nl));
  DescriptorField field;
  if (head.size() != 4 || !parse_int(head[0], field.grid_w) || !parse_int(head[1], field.grid_h) ||
      !parse_int(head[2], field.stride) || !parse_int(head[3], field.patch_size) || field.stride < 1)
    throw DataError("descriptor field: malformed header");
  const Eigen::MatrixXd rows = parse_matrix(text.substr(nl + 1));
  if (rows.rows() != static_cast<Eigen::Index>(field.grid_w) * field.grid_h || rows.cols() != kDescriptorDim)
    throw DataError("descriptor field: matrix shape does not match header");
  field.descriptors = rows.transpose();
  for (int gy = 0; gy < field.grid_h; ++gy)
    for (int gx = 0; gx < field.grid_w; ++gx) field.positions.push_back({gx * field.stride, gy * field.stride});
  return field;
}

// ---------------------------------------------------------------------------
// Model bundle: a directory holding everything `evaluate` and `encode` need.
//
//   config.txt      key=value pipeline configuration
//   subjects.txt    enrolled subject ids, line k = class id k
//   dictionary.txt  128 x n_atoms            (dhsc)
//   centers.txt     n_atoms x K              (global HLSC centers only)
//   pca.txt         PCA model                (pca-lda only)
//   lda.txt, svm.txt

struct ModelBundle {
  PipelineConfig config;
  std::vector<std::string> subjects;
  std::optional<Dictionary> dictionary;
  std::optional<GaussianCenters> centers;
  std::optional<PcaModel> pca;
  LdaModel lda;
  SvmModel svm;

  /// Dimension of the feature fed to LDA.
  Eigen::Index feature_dim() const {
    return config.method == Method::dhsc
               ? static_cast<Eigen::Index>(config.n_atoms) * config.pyramid.region_count()
               : (pca ? pca->output_dim() : 0);
  }

  /// Checks every stored shape against the config.
  void validate() const {
    config.validate();
    if (config.method == Method::dhsc) {
      if (!dictionary) throw DataError("bundle: dictionary missing");
      if (dictionary->dim() != kDescriptorDim || dictionary->size() != config.n_atoms)
        throw DataError("bundle: dictionary shape does not match config");
      if (config.hlsc_centers == CenterMode::global && config.coder == Coder::HLSC) {
        if (!centers) throw DataError("bundle: global HLSC centers missing");
        if (centers->centers.rows() != config.n_atoms) throw DataError("bundle: centers do not match dictionary");
      }
    } else {
      if (!pca) throw DataError("bundle: PCA model missing");
    }
    if (lda.input_dim() != feature_dim()) throw DataError("bundle: LDA input does not match feature dimension");
    if (svm.input_dim() != lda.output_dim()) throw DataError("bundle: SVM input does not match LDA output");
    if (svm.classes.size() != subjects.size() || lda.classes.size() != subjects.size())
      throw DataError("bundle: class count does not match subjects");
  }
};

inline void save_bundle(const ModelBundle& b, const std::filesystem::path& dir) {
  b.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw DataError("cannot create bundle directory: " + dir.string());
  save_config(b.config, dir / "config.txt");
  std::string ids;
  for (const auto& s : b.subjects) ids += s + '\n';
  write_file_atomic(dir / "subjects.txt", ids);
  if (b.dictionary) save_matrix(dir / "dictionary.txt", b.dictionary->atoms());
  if (b.centers) save_matrix(dir / "centers.txt", b.centers->centers);
  if (b.pca) save_model(dir / "pca.txt", to_model_file(*b.pca));
  save_model(dir / "lda.txt", to_model_file(b.lda));
  save_model(dir / "svm.txt", to_model_file(b.svm));
}

inline ModelBundle load_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("missing bundle directory: " + dir.string());
  ModelBundle b;
  b.config = load_config(dir / "config.txt");
  {
    const auto text = read_file(dir / "subjects.txt");
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      if (end > pos) b.subjects.push_back(text.substr(pos, end - pos));
      pos = end + 1;
    }
  }
  if (b.config.method == Method::dhsc)
    b.dictionary = Dictionary(load_matrix(dir / "dictionary.txt", kDescriptorDim, b.config.n_atoms));
  if (std::filesystem::exists(dir / "centers.txt")) b.centers = GaussianCenters{load_matrix(dir / "centers.txt")};
  if (std::filesystem::exists(dir / "pca.txt")) b.pca = pca_from_model_file(load_model(dir / "pca.txt"));
  b.lda = lda_from_model_file(load_model(dir / "lda.txt"));
  b.svm = svm_from_model_file(load_model(dir / "svm.txt"));
  b.validate();
  return b;
}

}  // namespace cfp
