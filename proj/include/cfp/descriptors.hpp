#pragma once

// Dense upright SIFT-style descriptors.
//
// Each patch is a 4x4 grid of cells; each cell holds an 8-bin gradient
// orientation histogram. Gradient magnitude is soft-assigned bilinearly to
// the two nearest cells along each axis and to the two nearest orientation
// bins. Component layout: ((cell_y * 4) + cell_x) * 8 + orientation_bin.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "cfp/errors.hpp"
#include "cfp/pressure_image.hpp"

namespace cfp {

inline constexpr int kCellsPerSide = 4;
inline constexpr int kOrientationBins = 8;
inline constexpr int kDescriptorDim = kCellsPerSide * kCellsPerSide * kOrientationBins;  // 128
inline constexpr double kDescriptorClamp = 0.2;

struct GridPosition {
  int x = 0;  // pixel column of the patch's top-left corner
  int y = 0;

  bool operator==(const GridPosition&) const = default;
};

struct DescriptorField {
  int grid_w = 0;
  int grid_h = 0;
  int stride = 4;
  int patch_size = 16;
  /// One column per patch, patches in row-major grid order.
  Eigen::MatrixXd descriptors;
  std::vector<GridPosition> positions;

  int size() const { return grid_w * grid_h; }
  int index(int gx, int gy) const { return gy * grid_w + gx; }
  auto descriptor(int gx, int gy) const { return descriptors.col(index(gx, gy)); }
};

/// Grid extent along one axis: floor((extent - patch) / stride) + 1.
constexpr int grid_extent(int extent, int patch, int stride) { return (extent - patch) / stride + 1; }

namespace detail {

/// Normalize, clamp at 0.2, renormalize. An all-zero histogram stays zero.
inline void normalize_descriptor(Eigen::Ref<Eigen::VectorXd> d) {
  const double n0 = d.norm();
  if (n0 == 0.0) return;
  d /= n0;
  d = d.cwiseMin(kDescriptorClamp);
  const double n1 = d.norm();
  if (n1 > 0.0) d /= n1;
}

}  // namespace detail

inline DescriptorField extract_dense_descriptors(const PressureImage& image, int stride = 4, int cell = 4) {
  if (stride < 1 || cell < 1) throw UsageError("stride and cell must be positive");
  const int patch = kCellsPerSide * cell;
  if (image.width < patch || image.height < patch)
    throw DataError("image smaller than one descriptor patch");
  if (image.pressure.size() != static_cast<std::size_t>(image.width) * image.height)
    throw DataError("pressure grid length does not match width*height");

  const int w = image.width;
  const int h = image.height;
  // Centered differences with replicated borders.
  std::vector<double> mag(static_cast<std::size_t>(w) * h);
  std::vector<double> ori(mag.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (image.at(std::min(x + 1, w - 1), y) - image.at(std::max(x - 1, 0), y));
      const double gy = 0.5 * (image.at(x, std::min(y + 1, h - 1)) - image.at(x, std::max(y - 1, 0)));
      const auto i = static_cast<std::size_t>(y) * w + x;
      mag[i] = std::hypot(gx, gy);
      double theta = std::atan2(gy, gx);
      if (theta < 0) theta += 2.0 * std::numbers::pi;
      ori[i] = theta * kOrientationBins / (2.0 * std::numbers::pi);  // in [0, 8]
    }

  DescriptorField field;
  field.stride = stride;
  field.patch_size = patch;
  field.grid_w = grid_extent(w, patch, stride);
  field.grid_h = grid_extent(h, patch, stride);
  field.descriptors.setZero(kDescriptorDim, field.size());
  field.positions.reserve(field.size());

  for (int gy = 0; gy < field.grid_h; ++gy)
    for (int gx = 0; gx < field.grid_w; ++gx) {
      const int ox = gx * stride;
      const int oy = gy * stride;
      field.positions.push_back({ox, oy});
      auto d = field.descriptors.col(field.index(gx, gy));
      for (int py = 0; py < patch; ++py) {
        const double v = (py + 0.5) / cell - 0.5;
        const int cy0 = static_cast<int>(std::floor(v));
        const double fy = v - cy0;
        for (int px = 0; px < patch; ++px) {
          const auto i = static_cast<std::size_t>(oy + py) * w + (ox + px);
          const double m = mag[i];
          if (m == 0.0) continue;
          const double u = (px + 0.5) / cell - 0.5;
          const int cx0 = static_cast<int>(std::floor(u));
          const double fx = u - cx0;
          const int o0 = static_cast<int>(std::floor(ori[i]));
          const double fo = ori[i] - o0;
          for (int dy = 0; dy < 2; ++dy) {
            const int cy = cy0 + dy;
            if (cy < 0 || cy >= kCellsPerSide) continue;
            const double wy = dy ? fy : 1.0 - fy;
            for (int dx = 0; dx < 2; ++dx) {
              const int cx = cx0 + dx;
              if (cx < 0 || cx >= kCellsPerSide) continue;
              const double wxy = wy * (dx ? fx : 1.0 - fx) * m;
              const int base = (cy * kCellsPerSide + cx) * kOrientationBins;
              d(base + (o0 % kOrientationBins)) += wxy * (1.0 - fo);
              d(base + ((o0 + 1) % kOrientationBins)) += wxy * fo;
            }
          }
        }
      }
      detail::normalize_descriptor(d);
    }
  return field;
}

using FlatDescriptor = std::pair<GridPosition, Eigen::VectorXd>;

/// Row-major list of (position, descriptor).
inline std::vector<FlatDescriptor> flatten_field(const DescriptorField& field) {
  std::vector<FlatDescriptor> out;
  out.reserve(field.size());
  for (int i = 0; i < field.size(); ++i) out.emplace_back(field.positions[i], field.descriptors.col(i));
  return out;
}

/// Inverse of flatten_field: places each descriptor by its position.
inline DescriptorField regroup_field(const std::vector<FlatDescriptor>& flat, int grid_w, int grid_h, int stride,
                                     int patch_size) {
  if (static_cast<int>(flat.size()) != grid_w * grid_h) throw DataError("descriptor count does not match grid");
  DescriptorField field;
  field.grid_w = grid_w;
  field.grid_h = grid_h;
  field.stride = stride;
  field.patch_size = patch_size;
  field.descriptors.setZero(kDescriptorDim, grid_w * grid_h);
  field.positions.resize(flat.size());
  std::vector<bool> seen(flat.size(), false);
  for (const auto& [pos, d] : flat) {
    if (pos.x % stride != 0 || pos.y % stride != 0) throw DataError("position is not on the stride lattice");
    const int gx = pos.x / stride;
    const int gy = pos.y / stride;
    if (gx < 0 || gx >= grid_w || gy < 0 || gy >= grid_h) throw DataError("position outside grid");
    const int i = field.index(gx, gy);
    if (seen[i]) throw DataError("duplicate descriptor position");
    if (d.size() != kDescriptorDim) throw DataError("descriptor must have 128 components");
    seen[i] = true;
    field.positions[i] = pos;
    field.descriptors.col(i) = d;
  }
  return field;
}

}  // namespace cfp
