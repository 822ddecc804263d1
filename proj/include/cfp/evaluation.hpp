#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfp/coding.hpp"
#include "cfp/config.hpp"
#include "cfp/descriptors.hpp"
#include "cfp/discriminative.hpp"
#include "cfp/errors.hpp"
#include "cfp/io_util.hpp"
#include "cfp/pressure_image.hpp"
#include "cfp/representation.hpp"

namespace cfp {

enum class Protocol { bare_bare, bare_shoe, shoe_shoe };

/// Report tag, e.g. "bare/shoe".
inline std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::bare_bare: return "bare/bare";
    case Protocol::bare_shoe: return "bare/shoe";
    case Protocol::shoe_shoe: return "shoe/shoe";
  }
  return "bare/bare";
}

/// CLI spelling, e.g. "bare-shoe".
inline std::string cli_name(Protocol p) {
  std::string s(to_string(p));
  std::replace(s.begin(), s.end(), '/', '-');
  return s;
}

inline Protocol parse_protocol(std::string_view s) {
  for (auto p : {Protocol::bare_bare, Protocol::bare_shoe, Protocol::shoe_shoe})
    if (s == to_string(p) || s == cli_name(p)) return p;
  throw UsageError("unknown protocol: " + std::string(s));
}

inline std::string_view protocol_caption(Protocol p) {
  switch (p) {
    case Protocol::bare_bare: return "registered barefoot, tested barefoot";
    case Protocol::bare_shoe: return "registered barefoot, tested wearing shoes";
    case Protocol::shoe_shoe: return "registered wearing shoes, tested wearing shoes";
  }
  return "";
}

struct ScoredPair {
  double score = 0;  // higher means more likely the same subject
  bool genuine = false;
};

struct OperatingPoint {
  double threshold = 0;
  double far = 0;
  double frr = 0;

  bool operator==(const OperatingPoint&) const = default;
};

struct EvalReport {
  std::vector<OperatingPoint> points;  // thresholds ascending
  double eer = 0;
  std::optional<double> identification_accuracy;
  Protocol protocol = Protocol::bare_bare;
  std::string method = "DHSC";

  bool operator==(const EvalReport&) const = default;
};

/// Features with their subject ids, one sample per row.
struct LabeledFeatures {
  std::vector<std::string> ids;
  Eigen::MatrixXd features;
};

inline double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

/// Mean gallery feature per subject, subjects in sorted id order.
inline std::pair<std::vector<std::string>, Eigen::MatrixXd> gallery_templates(const LabeledFeatures& gallery) {
  std::map<std::string, std::vector<Eigen::Index>> rows;
  for (std::size_t i = 0; i < gallery.ids.size(); ++i) rows[gallery.ids[i]].push_back(static_cast<Eigen::Index>(i));
  std::vector<std::string> ids;
  Eigen::MatrixXd templates(static_cast<Eigen::Index>(rows.size()), gallery.features.cols());
  Eigen::Index k = 0;
  for (const auto& [id, members] : rows) {
    ids.push_back(id);
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(gallery.features.cols());
    for (auto r : members) sum += gallery.features.row(r);
    templates.row(k++) = sum / static_cast<double>(members.size());
  }
  return {ids, templates};
}

/// One pair per (probe, enrolled subject), probes in input order and subjects
/// in sorted id order. Score is the cosine similarity to the subject's mean
/// gallery feature.
inline std::vector<ScoredPair> verification_scores(const LabeledFeatures& gallery, const LabeledFeatures& probes) {
  if (gallery.ids.empty()) throw DataError("empty gallery");
  if (static_cast<Eigen::Index>(gallery.ids.size()) != gallery.features.rows() ||
      static_cast<Eigen::Index>(probes.ids.size()) != probes.features.rows())
    throw UsageError("feature rows and id count differ");
  if (probes.features.rows() > 0 && probes.features.cols() != gallery.features.cols())
    throw UsageError("probe and gallery dimensions differ");
  const auto [ids, templates] = gallery_templates(gallery);
  std::vector<ScoredPair> pairs;
  pairs.reserve(probes.ids.size() * ids.size());
  for (std::size_t p = 0; p < probes.ids.size(); ++p)
    for (std::size_t s = 0; s < ids.size(); ++s)
      pairs.push_back({cosine_similarity(probes.features.row(static_cast<Eigen::Index>(p)).transpose(),
                                         templates.row(static_cast<Eigen::Index>(s)).transpose()),
                       probes.ids[p] == ids[s]});
  return pairs;
}

/// At most `n` evenly spaced points of a curve, both ends included; n <= 0
/// keeps everything.
inline std::vector<OperatingPoint> thin_curve(const std::vector<OperatingPoint>& full, int n) {
  if (n <= 0 || static_cast<std::size_t>(n) >= full.size()) return full;
  const int keep = std::max(n, 2);
  std::vector<OperatingPoint> thin;
  for (int k = 0; k < keep; ++k) {
    const auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(k) * (full.size() - 1) / (keep - 1)));
    if (thin.empty() || !(thin.back() == full[idx])) thin.push_back(full[idx]);
  }
  return thin;
}

/// FAR(t) = impostors with score >= t / impostors, FRR(t) = genuines with
/// score < t / genuines, for t over -inf, every distinct score ascending, +inf.
/// EER is where FAR - FRR changes sign, linearly interpolated between the two
/// bracketing operating points.
///
/// With n_thresholds > 0 the stored curve is thinned to that many points
/// (always keeping both infinite endpoints); the EER always uses the full sweep.
inline EvalReport far_frr_curve(const std::vector<ScoredPair>& pairs, int n_thresholds = 0) {
  std::vector<double> genuine;
  std::vector<double> impostor;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.score)) throw NumericError("non-finite verification score");
    (p.genuine ? genuine : impostor).push_back(p.score);
  }
  if (genuine.empty()) throw DataError("no genuine pairs");
  if (impostor.empty()) throw DataError("no impostor pairs");
  std::sort(genuine.begin(), genuine.end());
  std::sort(impostor.begin(), impostor.end());

  std::vector<double> thresholds;
  thresholds.reserve(pairs.size() + 2);
  thresholds.push_back(-std::numeric_limits<double>::infinity());
  std::merge(genuine.begin(), genuine.end(), impostor.begin(), impostor.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  const auto ng = static_cast<double>(genuine.size());
  const auto ni = static_cast<double>(impostor.size());
  std::vector<OperatingPoint> full;
  full.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto below_g = std::lower_bound(genuine.begin(), genuine.end(), t) - genuine.begin();
    const auto below_i = std::lower_bound(impostor.begin(), impostor.end(), t) - impostor.begin();
    full.push_back({t, (ni - static_cast<double>(below_i)) / ni, static_cast<double>(below_g) / ng});
  }

  EvalReport report;
  report.eer = full.back().frr;
  for (std::size_t i = 0; i < full.size(); ++i) {
    const double diff = full[i].far - full[i].frr;
    if (diff == 0.0) {
      report.eer = full[i].far;
      break;
    }
    if (i + 1 < full.size()) {
      const double next = full[i + 1].far - full[i + 1].frr;
      if (diff > 0 && next < 0) {
        const double alpha = diff / (diff - next);
        report.eer = full[i].far + alpha * (full[i + 1].far - full[i].far);
        break;
      }
    }
  }

  report.points = thin_curve(full, n_thresholds);
  return report;
}

/// The stored operating point with the smallest |FAR - FRR| (first on ties).
inline OperatingPoint balanced_point(const EvalReport& report) {
  if (report.points.empty()) throw UsageError("empty report");
  return *std::min_element(report.points.begin(), report.points.end(), [](const auto& a, const auto& b) {
    return std::abs(a.far - a.frr) < std::abs(b.far - b.frr);
  });
}

/// `threshold,far,frr` rows followed by an `eer,<value>` footer.
inline std::string format_report_csv(const EvalReport& report) {
  std::string out = "threshold,far,frr\n";
  for (const auto& p : report.points)
    out += format_double(p.threshold) + ',' + format_double(p.far) + ',' + format_double(p.frr) + '\n';
  out += "eer," + format_double(report.eer) + '\n';
  return out;
}

/// "0.1%", "19.0%", "0.02%"
inline std::string format_percent(double fraction) {
  const double pct = 100.0 * fraction;
  char buf[32];
  if (pct > 0 && pct < 0.095)
    std::snprintf(buf, sizeof(buf), "%.2f%%", pct);
  else
    std::snprintf(buf, sizeof(buf), "%.1f%%", pct);
  return buf;
}

/// e.g. "DHSC  bare/bare  FRR 0.1% / FAR 0.9%  EER 0.5%"
inline std::string format_report_row(const EvalReport& report, const OperatingPoint& point) {
  std::string row = report.method + "  " + std::string(to_string(report.protocol)) + "  FRR " +
                    format_percent(point.frr) + " / FAR " + format_percent(point.far) + "  EER " +
                    format_percent(report.eer);
  if (report.identification_accuracy) row += "  ID " + format_percent(*report.identification_accuracy);
  return row;
}

/// Human-readable table in the layout of the published result tables.
inline std::string format_report_table(const EvalReport& report) {
  const auto op = balanced_point(report);
  char buf[64];
  std::string out = "Protocol " + std::string(to_string(report.protocol)) + " (" +
                    std::string(protocol_caption(report.protocol)) + ")\n";
  std::snprintf(buf, sizeof(buf), "%-6s%10s\n", "", report.method.c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-6s%10s\n", "FRR", format_percent(op.frr).c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-6s%10s\n", "FAR", format_percent(op.far).c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-6s%10s\n", "EER", format_percent(report.eer).c_str());
  out += buf;
  if (report.identification_accuracy) {
    std::snprintf(buf, sizeof(buf), "%-6s%10s\n", "ID", format_percent(*report.identification_accuracy).c_str());
    out += buf;
  }
  return out;
}

/// Fraction of probes whose predicted class equals the true label.
inline double identification_accuracy(const SvmModel& model, const Eigen::MatrixXd& probes,
                                      const std::vector<int>& labels) {
  if (probes.rows() == 0) throw DataError("empty probe set");
  if (static_cast<std::size_t>(probes.rows()) != labels.size()) throw UsageError("probe rows and label count differ");
  if (probes.cols() != model.input_dim()) throw UsageError("probe dimension does not match SVM model");
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < probes.rows(); ++i)
    if (svm_predict(model, probes.row(i).transpose()) == labels[static_cast<std::size_t>(i)]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(probes.rows());
}

// ---------------------------------------------------------------------------
// Discriminative-component heat map

struct HeatMap {
  int grid_w = 0;
  int grid_h = 0;
  std::vector<double> grid;  // per patch, row-major, normalized to [0, 65535]
  PressureImage image;       // grid upsampled to the input size (nearest patch center)
};

/// Attributes each pooled feature to the patch that attained its regional
/// max. A patch's contribution is the sum, over the (region, atom) maxima it
/// owns, of ||row of the LDA projection for that pooled entry|| * |z|.
/// Contributions are scaled so the largest becomes 65535.
inline HeatMap important_components(const LdaModel& lda, const Dictionary& dict, const PoolingPyramid& pyramid,
                                    const PressureImage& image, const PipelineConfig& config,
                                    const std::optional<GaussianCenters>& centers = {}) {
  const auto n = dict.size();
  if (lda.projection.size() == 0) throw UsageError("LDA model is not trained");
  if (lda.input_dim() != n * pyramid.region_count())
    throw UsageError("LDA input dimension does not match dictionary and pyramid");
  image.validate();
  const auto field = extract_dense_descriptors(image, config.stride, config.cell);
  const auto codes = encode_field(field, dict, encode_options(config, centers));
  const Eigen::VectorXd row_norms = lda.projection.rowwise().norm();

  std::vector<double> contrib(static_cast<std::size_t>(codes.grid_w) * codes.grid_h, 0.0);
  Eigen::Index offset = 0;
  for (auto [rows, cols] : pyramid.levels)
    for (int ry = 0; ry < rows; ++ry) {
      const auto [y0, y1] = region_span(codes.grid_h, rows, ry);
      for (int rx = 0; rx < cols; ++rx) {
        const auto [x0, x1] = region_span(codes.grid_w, cols, rx);
        for (Eigen::Index a = 0; a < n; ++a) {
          double best = 0;
          int owner = -1;
          for (int gy = y0; gy < y1; ++gy)
            for (int gx = x0; gx < x1; ++gx) {
              const double v = std::abs(codes.codes(a, codes.index(gx, gy)));
              if (v > best) {
                best = v;
                owner = codes.index(gx, gy);
              }
            }
          if (owner >= 0) contrib[static_cast<std::size_t>(owner)] += row_norms(offset + a) * best;
        }
        offset += n;
      }
    }

  HeatMap map;
  map.grid_w = codes.grid_w;
  map.grid_h = codes.grid_h;
  const double peak = contrib.empty() ? 0.0 : *std::max_element(contrib.begin(), contrib.end());
  map.grid.resize(contrib.size(), 0.0);
  if (peak > 0)
    for (std::size_t i = 0; i < contrib.size(); ++i) map.grid[i] = std::round(65535.0 * contrib[i] / peak);

  map.image = PressureImage(image.width, image.height);
  map.image.subject_id = image.subject_id;
  map.image.footwear = image.footwear;
  map.image.session = image.session;
  const double half = 0.5 * field.patch_size;
  for (int y = 0; y < image.height; ++y) {
    const int gy = std::clamp(static_cast<int>(std::floor((y + 0.5 - half) / config.stride + 0.5)), 0, map.grid_h - 1);
    for (int x = 0; x < image.width; ++x) {
      const int gx = std::clamp(static_cast<int>(std::floor((x + 0.5 - half) / config.stride + 0.5)), 0, map.grid_w - 1);
      map.image.at(x, y) = map.grid[static_cast<std::size_t>(gy) * map.grid_w + gx];
    }
  }
  return map;
}

}  // namespace cfp
