#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cfp/coding.hpp"
#include "cfp/errors.hpp"
#include "cfp/io_util.hpp"

namespace cfp {

enum class Coder { SC, LLC, HLSC };

/// Image-level feature route: coded+pooled descriptors, or raw pixels
/// through PCA (the baseline). Both end in LDA.
enum class Method { dhsc, pca_lda };

enum class CenterMode { per_image, global };

inline std::string_view to_string(Coder c) {
  switch (c) {
    case Coder::SC: return "SC";
    case Coder::LLC: return "LLC";
    case Coder::HLSC: return "HLSC";
  }
  return "HLSC";
}

inline Coder parse_coder(std::string_view s) {
  if (s == "SC" || s == "sc") return Coder::SC;
  if (s == "LLC" || s == "llc") return Coder::LLC;
  if (s == "HLSC" || s == "hlsc") return Coder::HLSC;
  throw UsageError("unknown coder: " + std::string(s));
}

inline std::string_view to_string(Method m) { return m == Method::dhsc ? "dhsc" : "pca-lda"; }

inline Method parse_method(std::string_view s) {
  if (s == "dhsc") return Method::dhsc;
  if (s == "pca-lda") return Method::pca_lda;
  throw UsageError("unknown method: " + std::string(s));
}

inline std::string_view to_string(LlcVariant v) { return v == LlcVariant::closed_form ? "closed-form" : "weighted-l1"; }

inline LlcVariant parse_llc_variant(std::string_view s) {
  if (s == "closed-form") return LlcVariant::closed_form;
  if (s == "weighted-l1") return LlcVariant::weighted_l1;
  throw UsageError("unknown llc variant: " + std::string(s));
}

inline std::string_view to_string(CenterMode m) { return m == CenterMode::per_image ? "per-image" : "global"; }

inline CenterMode parse_center_mode(std::string_view s) {
  if (s == "per-image") return CenterMode::per_image;
  if (s == "global") return CenterMode::global;
  throw UsageError("unknown hlsc center mode: " + std::string(s));
}

/// Region grids of a spatial pooling pyramid, coarsest first.
struct PoolingPyramid {
  std::vector<std::pair<int, int>> levels{{1, 1}, {2, 2}};  // (rows, cols)

  int region_count() const {
    int total = 0;
    for (auto [r, c] : levels) total += r * c;
    return total;
  }

  void validate() const {
    if (levels.empty()) throw UsageError("pooling pyramid needs at least one level");
    for (auto [r, c] : levels)
      if (r < 1 || c < 1) throw UsageError("pyramid grid dimensions must be >= 1");
  }

  bool operator==(const PoolingPyramid&) const = default;
};

/// "1x1,2x2"
inline std::string format_pyramid(const PoolingPyramid& p) {
  std::string out;
  for (auto [r, c] : p.levels) {
    if (!out.empty()) out += ',';
    out += std::to_string(r) + 'x' + std::to_string(c);
  }
  return out;
}

inline PoolingPyramid parse_pyramid(std::string_view s) {
  PoolingPyramid p;
  p.levels.clear();
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    const auto item = s.substr(start, end - start);
    const auto x = item.find('x');
    int r = 0;
    int c = 0;
    if (x == std::string_view::npos || !parse_int(item.substr(0, x), r) || !parse_int(item.substr(x + 1), c))
      throw UsageError("bad pyramid level: " + std::string(item));
    p.levels.emplace_back(r, c);
    start = end + 1;
  }
  p.validate();
  return p;
}

struct PipelineConfig {
  int stride = 4;
  int cell = 4;
  int n_atoms = 128;
  double lambda = 0.15;
  Coder coder = Coder::HLSC;
  PoolingPyramid pyramid;
  int lda_dim = 200;
  double svm_c = 0.1;
  int hlsc_k = 4;
  std::uint64_t seed = 0;

  Method method = Method::dhsc;
  LlcVariant llc_variant = LlcVariant::closed_form;
  CenterMode hlsc_centers = CenterMode::per_image;
  int pca_dim = 200;
  double lda_shrinkage = 1e-4;
  int svm_epochs = 200;
  /// Descriptors sampled (without replacement) for dictionary learning.
  int dict_samples = 8192;
  int dict_iterations = 10;
  int dict_init_iterations = 20;

  bool operator==(const PipelineConfig&) const = default;

  void validate() const {
    auto positive = [](auto v, const char* name) {
      if (!(v > 0)) throw UsageError(std::string(name) + " must be positive");
    };
    positive(stride, "stride");
    positive(cell, "cell");
    positive(n_atoms, "n_atoms");
    positive(lambda, "lambda");
    positive(lda_dim, "lda_dim");
    positive(svm_c, "svm_c");
    positive(hlsc_k, "hlsc_k");
    positive(pca_dim, "pca_dim");
    positive(lda_shrinkage, "lda_shrinkage");
    positive(svm_epochs, "svm_epochs");
    positive(dict_samples, "dict_samples");
    positive(dict_iterations, "dict_iterations");
    positive(dict_init_iterations, "dict_init_iterations");
    if (n_atoms < 2) throw UsageError("n_atoms must be >= 2");
    pyramid.validate();
  }
};

/// key=value lines, one per field, in a fixed order.
inline std::string format_config(const PipelineConfig& c) {
  std::string out;
  auto kv = [&](std::string_view k, const std::string& v) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  };
  kv("stride", std::to_string(c.stride));
  kv("cell", std::to_string(c.cell));
  kv("n_atoms", std::to_string(c.n_atoms));
  kv("lambda", format_double(c.lambda));
  kv("coder", std::string(to_string(c.coder)));
  kv("pyramid", format_pyramid(c.pyramid));
  kv("lda_dim", std::to_string(c.lda_dim));
  kv("svm_c", format_double(c.svm_c));
  kv("hlsc_k", std::to_string(c.hlsc_k));
  kv("seed", std::to_string(c.seed));
  kv("method", std::string(to_string(c.method)));
  kv("llc_variant", std::string(to_string(c.llc_variant)));
  kv("hlsc_centers", std::string(to_string(c.hlsc_centers)));
  kv("pca_dim", std::to_string(c.pca_dim));
  kv("lda_shrinkage", format_double(c.lda_shrinkage));
  kv("svm_epochs", std::to_string(c.svm_epochs));
  kv("dict_samples", std::to_string(c.dict_samples));
  kv("dict_iterations", std::to_string(c.dict_iterations));
  kv("dict_init_iterations", std::to_string(c.dict_init_iterations));
  return out;
}

/// Parses key=value lines on top of `base`. Blank lines and lines starting
/// with '#' are ignored; unknown keys are an error.
inline PipelineConfig parse_config(std::string_view text, PipelineConfig base = {}) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw UsageError("config line without '=': " + std::string(line));
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    auto as_int = [&](int& dst) {
      if (!parse_int(value, dst)) throw UsageError("config " + std::string(key) + ": not an integer");
    };
    auto as_double = [&](double& dst) {
      if (!parse_double(value, dst)) throw UsageError("config " + std::string(key) + ": not a number");
    };
    if (key == "stride") as_int(base.stride);
    else if (key == "cell") as_int(base.cell);
    else if (key == "n_atoms") as_int(base.n_atoms);
    else if (key == "lambda") as_double(base.lambda);
    else if (key == "coder") base.coder = parse_coder(value);
    else if (key == "pyramid") base.pyramid = parse_pyramid(value);
    else if (key == "lda_dim") as_int(base.lda_dim);
    else if (key == "svm_c") as_double(base.svm_c);
    else if (key == "hlsc_k") as_int(base.hlsc_k);
    else if (key == "seed") {
      if (!parse_int(value, base.seed)) throw UsageError("config seed: not an unsigned integer");
    }
    else if (key == "method") base.method = parse_method(value);
    else if (key == "llc_variant") base.llc_variant = parse_llc_variant(value);
    else if (key == "hlsc_centers") base.hlsc_centers = parse_center_mode(value);
    else if (key == "pca_dim") as_int(base.pca_dim);
    else if (key == "lda_shrinkage") as_double(base.lda_shrinkage);
    else if (key == "svm_epochs") as_int(base.svm_epochs);
    else if (key == "dict_samples") as_int(base.dict_samples);
    else if (key == "dict_iterations") as_int(base.dict_iterations);
    else if (key == "dict_init_iterations") as_int(base.dict_init_iterations);
    else throw UsageError("unknown config key: " + std::string(key));
  }
  base.validate();
  return base;
}

inline PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

inline void save_config(const PipelineConfig& c, const std::filesystem::path& path) {
  write_file_atomic(path, format_config(c));
}

}  // namespace cfp
