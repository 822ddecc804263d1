#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "cfp/coding.hpp"
#include "cfp/config.hpp"
#include "cfp/descriptors.hpp"
#include "cfp/errors.hpp"
#include "cfp/pressure_image.hpp"

namespace cfp {

/// Codes laid out like the descriptor grid: one column per patch, row-major.
struct CodeGrid {
  int grid_w = 0;
  int grid_h = 0;
  Eigen::MatrixXd codes;  // n_atoms x (grid_w * grid_h)

  int index(int gx, int gy) const { return gy * grid_w + gx; }
};

struct Representation {
  Eigen::VectorXd feature;
  Coder coder = Coder::HLSC;
  PoolingPyramid pyramid;
};

struct EncodeOptions {
  Coder coder = Coder::HLSC;
  double lambda = 0.15;
  LlcVariant llc_variant = LlcVariant::closed_form;
  /// Global HLSC centers; when absent, HLSC fits hlsc_k centers per image.
  std::optional<GaussianCenters> centers;
  int hlsc_k = 4;
  std::uint64_t seed = 0;
};

inline bool is_zero_descriptor(const Eigen::Ref<const Eigen::VectorXd>& d) { return (d.array() == 0.0).all(); }

/// LLC codes of the non-zero descriptors of a field, as columns.
inline Eigen::MatrixXd llc_codes_of(const DescriptorField& field, const Dictionary& dict, double lambda,
                                    LlcVariant variant = LlcVariant::closed_form) {
  std::vector<Eigen::Index> live;
  for (int i = 0; i < field.size(); ++i)
    if (!is_zero_descriptor(field.descriptors.col(i))) live.push_back(i);
  Eigen::MatrixXd out(dict.size(), static_cast<Eigen::Index>(live.size()));
  for (std::size_t k = 0; k < live.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = llc_encode(field.descriptors.col(live[k]), dict, lambda, variant);
  return out;
}

/// Applies the selected coder to every descriptor. All-zero descriptors
/// (uniform patches) map to the all-zero code, LLC included.
inline CodeGrid encode_field(const DescriptorField& field, const Dictionary& dict, const EncodeOptions& opt) {
  if (opt.centers && opt.coder != Coder::HLSC) throw UsageError("Gaussian centers are only used by the HLSC coder");
  if (field.descriptors.rows() != dict.dim()) throw UsageError("descriptor dimension does not match dictionary");

  CodeGrid grid;
  grid.grid_w = field.grid_w;
  grid.grid_h = field.grid_h;
  grid.codes.setZero(dict.size(), field.size());

  GaussianCenters centers;
  Eigen::MatrixXd llc;  // LLC codes of live patches, reused by HLSC
  std::vector<int> live;
  for (int i = 0; i < field.size(); ++i)
    if (!is_zero_descriptor(field.descriptors.col(i))) live.push_back(i);

  if (opt.coder == Coder::HLSC && !live.empty()) {
    llc.resize(dict.size(), static_cast<Eigen::Index>(live.size()));
    for (std::size_t k = 0; k < live.size(); ++k)
      llc.col(static_cast<Eigen::Index>(k)) = llc_encode(field.descriptors.col(live[k]), dict, opt.lambda);
    if (opt.centers) {
      centers = *opt.centers;
    } else {
      const int k = std::min<int>(opt.hlsc_k, static_cast<int>(live.size()));
      centers = fit_gaussian_centers(llc, k, opt.seed);
    }
  }

  for (std::size_t k = 0; k < live.size(); ++k) {
    const int i = live[k];
    const auto x = field.descriptors.col(i);
    switch (opt.coder) {
      case Coder::SC:
        grid.codes.col(i) = sparse_encode(x, dict, opt.lambda);
        break;
      case Coder::LLC:
        grid.codes.col(i) = llc_encode(x, dict, opt.lambda, opt.llc_variant);
        break;
      case Coder::HLSC: {
        const Eigen::VectorXd w = hlsc_weights(llc.col(static_cast<Eigen::Index>(k)), centers);
        grid.codes.col(i) = weighted_lasso_encode(x, dict, opt.lambda * w);
        break;
      }
    }
  }
  return grid;
}

/// [begin, end) of region `r` of `parts` along an axis of length `extent`;
/// the remainder goes to the last region.
inline std::pair<int, int> region_span(int extent, int parts, int r) {
  const int base = extent / parts;
  const int begin = r * base;
  const int end = r == parts - 1 ? extent : begin + base;
  return {begin, end};
}

/// Max of |code| per region and atom, concatenated level by level, regions
/// row-major, atoms within a region.
inline Representation max_pool(const CodeGrid& grid, const PoolingPyramid& pyramid) {
  pyramid.validate();
  if (grid.grid_w < 1 || grid.grid_h < 1) throw UsageError("cannot pool an empty code grid");
  const auto n = grid.codes.rows();
  Representation rep;
  rep.pyramid = pyramid;
  rep.feature.setZero(n * pyramid.region_count());
  Eigen::Index offset = 0;
  for (auto [rows, cols] : pyramid.levels) {
    for (int ry = 0; ry < rows; ++ry) {
      const auto [y0, y1] = region_span(grid.grid_h, rows, ry);
      for (int rx = 0; rx < cols; ++rx) {
        const auto [x0, x1] = region_span(grid.grid_w, cols, rx);
        auto out = rep.feature.segment(offset, n);
        for (int gy = y0; gy < y1; ++gy)
          for (int gx = x0; gx < x1; ++gx) out = out.cwiseMax(grid.codes.col(grid.index(gx, gy)).cwiseAbs());
        offset += n;
      }
    }
  }
  return rep;
}

inline EncodeOptions encode_options(const PipelineConfig& config, std::optional<GaussianCenters> centers = {}) {
  EncodeOptions opt;
  opt.coder = config.coder;
  opt.lambda = config.lambda;
  opt.llc_variant = config.llc_variant;
  opt.centers = config.coder == Coder::HLSC ? std::move(centers) : std::nullopt;
  opt.hlsc_k = config.hlsc_k;
  opt.seed = config.seed;
  return opt;
}

/// extract_dense_descriptors -> encode_field -> max_pool.
inline Representation build_representation(const PressureImage& image, const Dictionary& dict,
                                           const PipelineConfig& config,
                                           const std::optional<GaussianCenters>& centers = {}) {
  const auto field = extract_dense_descriptors(image, config.stride, config.cell);
  auto rep = max_pool(encode_field(field, dict, encode_options(config, centers)), config.pyramid);
  rep.coder = config.coder;
  return rep;
}

}  // namespace cfp
