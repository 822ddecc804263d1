#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "cfp/errors.hpp"
#include "cfp/random.hpp"

namespace cfp {

struct KMeansResult {
  Eigen::MatrixXd centers;  // dim x K
  std::vector<int> assignment;
  int iterations = 0;
};

namespace detail {

/// Lexicographic column order; makes clustering depend on the point multiset
/// rather than on the order points were supplied in.
inline std::vector<int> lexicographic_order(const Eigen::MatrixXd& points) {
  std::vector<int> order(points.cols());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
      if (points(r, a) < points(r, b)) return true;
      if (points(r, a) > points(r, b)) return false;
    }
    return false;
  });
  return order;
}

inline int nearest_column(const Eigen::MatrixXd& centers, const Eigen::Ref<const Eigen::VectorXd>& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centers.cols(); ++k) {
    const double d = (centers.col(k) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Points are columns. Ties in
/// assignment go to the lowest center index; an emptied cluster keeps its
/// previous center.
inline KMeansResult kmeans(const Eigen::MatrixXd& points_in, int k, std::uint64_t seed, int max_iterations = 100) {
  const auto n = static_cast<int>(points_in.cols());
  if (k < 1) throw UsageError("k-means needs K >= 1");
  if (k > n) throw UsageError("k-means needs at least K points");

  const auto order = detail::lexicographic_order(points_in);
  Eigen::MatrixXd points(points_in.rows(), n);
  for (int i = 0; i < n; ++i) points.col(i) = points_in.col(order[i]);

  Rng rng(derive_seed(seed, 0x6b6d));
  KMeansResult res;
  res.centers.resize(points.rows(), k);
  Eigen::VectorXd d2(n);
  const int first = static_cast<int>(rng.uniform_int(0, n - 1));
  res.centers.col(0) = points.col(first);
  for (int i = 0; i < n; ++i) d2(i) = (points.col(i) - res.centers.col(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    int pick = 0;
    if (total > 0) {
      const double r = rng.uniform() * total;
      double acc = 0;
      pick = -1;
      for (int i = 0; i < n; ++i) {
        acc += d2(i);
        if (d2(i) > 0 && acc > r) {
          pick = i;
          break;
        }
      }
      if (pick < 0)  // rounding at the tail
        for (int i = n - 1; i >= 0; --i)
          if (d2(i) > 0) {
            pick = i;
            break;
          }
    }
    res.centers.col(c) = points.col(pick);
    for (int i = 0; i < n; ++i) d2(i) = std::min(d2(i), (points.col(i) - res.centers.col(c)).squaredNorm());
  }

  std::vector<int> assign(n, -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int a = detail::nearest_column(res.centers, points.col(i));
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    res.iterations = it + 1;
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.col(assign[i]) += points.col(i);
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) res.centers.col(c) = sums.col(c) / counts[c];
  }

  res.assignment.assign(n, 0);
  for (int i = 0; i < n; ++i) res.assignment[order[i]] = assign[i];
  return res;
}

}  // namespace cfp
