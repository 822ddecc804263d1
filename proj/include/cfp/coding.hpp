#pragma once

// Per-descriptor coders over a fixed dictionary:
//   sparse_encode  - LASSO, min 1/2||x - Dz||^2 + lambda * sum|z_i|
//   llc_encode     - locality-constrained closed form, sum-to-one codes
//   hlsc_encode    - LLC code -> nearest Gaussian center -> reweighted LASSO
// All three share the cyclic coordinate-descent solver below.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cfp/errors.hpp"
#include "cfp/kmeans.hpp"

namespace cfp {

using Code = Eigen::VectorXd;

inline constexpr double kAtomNormTolerance = 1e-9;
inline constexpr double kCdTolerance = 1e-8;
inline constexpr int kCdMaxSweeps = 1000;
// Sweeps between active-set refinement attempts.
inline constexpr int kCdRefineEvery = 50;
inline constexpr double kLlcRidge = 1e-8;
inline constexpr double kHlscWeightFloor = 1e-3;

/// m x n matrix of unit-norm atoms (columns), with its Gram matrix cached.
class Dictionary {
 public:
  Dictionary() = default;

  explicit Dictionary(Eigen::MatrixXd atoms) : atoms_(std::move(atoms)) {
    if (atoms_.cols() < 2) throw UsageError("dictionary needs at least 2 atoms");
    if (atoms_.rows() < 1) throw UsageError("dictionary atoms must be non-empty");
    if (!atoms_.allFinite()) throw NumericError("dictionary has non-finite entries");
    for (Eigen::Index j = 0; j < atoms_.cols(); ++j)
      if (std::abs(atoms_.col(j).norm() - 1.0) > kAtomNormTolerance)
        throw NumericError("dictionary atom " + std::to_string(j) + " is not unit-norm");
    gram_ = atoms_.transpose() * atoms_;
  }

  /// Normalizes every column first; zero columns are rejected.
  static Dictionary from_unnormalized(Eigen::MatrixXd atoms) {
    for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
      const double n = atoms.col(j).norm();
      if (!(n > 0)) throw NumericError("cannot normalize a zero atom");
      atoms.col(j) /= n;
    }
    return Dictionary(std::move(atoms));
  }

  const Eigen::MatrixXd& atoms() const { return atoms_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  Eigen::Index dim() const { return atoms_.rows(); }
  Eigen::Index size() const { return atoms_.cols(); }
  auto atom(Eigen::Index j) const { return atoms_.col(j); }

  /// Overcomplete (n > m) is the intended regime; anything else is allowed
  /// but flagged.
  bool not_overcomplete() const { return size() <= dim(); }

 private:
  Eigen::MatrixXd atoms_;
  Eigen::MatrixXd gram_;
};

namespace detail {

inline void check_input(const Eigen::Ref<const Eigen::VectorXd>& x, const Dictionary& dict) {
  if (x.size() != dict.dim())
    throw UsageError("descriptor dimension " + std::to_string(x.size()) + " does not match dictionary " +
                     std::to_string(dict.dim()));
  if (!x.allFinite()) throw NumericError("non-finite input descriptor");
}

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace detail

struct SolverStats {
  int sweeps = 0;
  double last_max_change = 0;
  /// True when the result came from the active-set search.
  bool polished = false;
};

namespace detail {

/// 1/2 z^T G z - (D^T x)^T z + sum t_i |z_i|, i.e. the weighted LASSO
/// objective without the constant 1/2 x^T x.
inline double reduced_objective(const Eigen::VectorXd& dtx, const Eigen::MatrixXd& g,
                                const Eigen::Ref<const Eigen::VectorXd>& t, const Eigen::VectorXd& z) {
  return 0.5 * z.dot(g * z) - dtx.dot(z) + t.dot(z.cwiseAbs());
}

/// Cholesky factor of G restricted to a changing index set, updated in
/// O(k^2) per insertion or deletion.
class ActiveCholesky {
 public:
  explicit ActiveCholesky(const Eigen::MatrixXd& g) : g_(g), l_(g.rows(), g.rows()) {}

  const std::vector<Eigen::Index>& indices() const { return idx_; }

  bool add(Eigen::Index j) {
    const auto k = static_cast<Eigen::Index>(idx_.size());
    Eigen::VectorXd col(k);
    for (Eigen::Index a = 0; a < k; ++a) col(a) = g_(idx_[static_cast<std::size_t>(a)], j);
    if (k > 0) l_.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(col);
    const double d2 = g_(j, j) - col.squaredNorm();
    if (!(d2 > 1e-14 * g_(j, j))) return false;
    l_.row(k).head(k) = col.transpose();
    l_(k, k) = std::sqrt(d2);
    idx_.push_back(j);
    return true;
  }

  void remove(std::size_t pos) {
    const auto k = static_cast<Eigen::Index>(idx_.size());
    const auto p = static_cast<Eigen::Index>(pos);
    // Fold the removed column into the trailing block (rank-one update).
    Eigen::VectorXd c = l_.col(p).segment(p + 1, k - p - 1);
    for (Eigen::Index i = p + 1; i < k; ++i) {
      const auto ci = i - p - 1;
      const double lii = l_(i, i);
      const double r = std::hypot(lii, c(ci));
      const double cs = r / lii;
      const double sn = c(ci) / lii;
      l_(i, i) = r;
      for (Eigen::Index j = i + 1; j < k; ++j) {
        const auto cj = j - p - 1;
        l_(j, i) = (l_(j, i) + sn * c(cj)) / cs;
        c(cj) = cs * c(cj) - sn * l_(j, i);
      }
    }
    for (Eigen::Index i = p; i + 1 < k; ++i) {
      l_.row(i).head(p) = l_.row(i + 1).head(p);
      l_.row(i).segment(p, i - p + 1) = l_.row(i + 1).segment(p + 1, i - p + 1);
    }
    idx_.erase(idx_.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  /// Makes the index set equal to the nonzeros of `sign`, keeping the
  /// surviving order. Returns false if an added index is numerically dependent.
  bool sync(const Eigen::VectorXd& sign) {
    for (std::size_t a = idx_.size(); a-- > 0;)
      if (sign(idx_[a]) == 0) remove(a);
    std::vector<char> present(static_cast<std::size_t>(sign.size()), 0);
    for (auto i : idx_) present[static_cast<std::size_t>(i)] = 1;
    for (Eigen::Index i = 0; i < sign.size(); ++i)
      if (sign(i) != 0 && !present[static_cast<std::size_t>(i)] && !add(i)) return false;
    return true;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const auto k = static_cast<Eigen::Index>(idx_.size());
    const auto lk = l_.topLeftCorner(k, k);
    Eigen::VectorXd y = lk.triangularView<Eigen::Lower>().solve(rhs);
    lk.triangularView<Eigen::Lower>().transpose().solveInPlace(y);
    return y;
  }

 private:
  const Eigen::MatrixXd& g_;
  Eigen::MatrixXd l_;
  std::vector<Eigen::Index> idx_;
};

/// Exact solution for the support and signs of z, by a fresh factorization:
///   G_SS z_S = (D^T x)_S - t_S * sign_S.
/// Accepted only if the signs hold and every coefficient off the support
/// satisfies |correlation| <= t.
inline bool solve_on_support(const Eigen::VectorXd& dtx, const Eigen::MatrixXd& g,
                             const Eigen::Ref<const Eigen::VectorXd>& t, Code& z) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (z(i) != 0) support.push_back(i);
  const auto k = static_cast<Eigen::Index>(support.size());
  Code candidate = Code::Zero(z.size());
  if (k > 0) {
    Eigen::MatrixXd gss(k, k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      rhs(a) = dtx(support[a]) - t(support[a]) * (z(support[a]) > 0 ? 1.0 : -1.0);
      for (Eigen::Index b = 0; b < k; ++b) gss(a, b) = g(support[a], support[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gss);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd zs = llt.solve(rhs);
    for (Eigen::Index a = 0; a < k; ++a) {
      if (!(zs(a) * z(support[a]) > 0)) return false;
      candidate(support[a]) = zs(a);
    }
  }
  const Eigen::VectorXd corr = dtx - g * candidate;
  for (Eigen::Index j = 0; j < corr.size(); ++j)
    if (candidate(j) == 0.0 && std::abs(corr(j)) > t(j) * (1.0 + 1e-12) + 1e-12) return false;
  z = candidate;
  return true;
}

/// Called when atom j (sign already set) is a combination of the active
/// atoms. Along v with D v = 0 the fit is unchanged and the l1 term is linear,
/// falling whenever |corr_j| > t_j, so cur moves along v until an active
/// coefficient reaches zero. Leaves the active set independent again.
inline bool null_space_swap(const Eigen::VectorXd& dtx, const Eigen::MatrixXd& g,
                            const Eigen::Ref<const Eigen::VectorXd>& t, ActiveCholesky& chol, Code& cur,
                            Eigen::VectorXd& sign, Eigen::Index j) {
  const double sj = sign(j);
  sign(j) = 0;
  if (!chol.sync(sign)) return false;
  const auto& active = chol.indices();
  const auto k = static_cast<Eigen::Index>(active.size());
  Eigen::VectorXd gaj(k);
  for (Eigen::Index a = 0; a < k; ++a) gaj(a) = g(active[a], j);
  const Eigen::VectorXd va = -sj * chol.solve(gaj);
  double slope = t(j);
  for (Eigen::Index a = 0; a < k; ++a) slope += t(active[a]) * sign(active[a]) * va(a);
  if (!(slope < 0)) return false;
  double step = std::numeric_limits<double>::infinity();
  Eigen::Index hit = -1;
  for (Eigen::Index a = 0; a < k; ++a) {
    if (va(a) * sign(active[a]) >= 0) continue;
    const double s = -cur(active[a]) / va(a);
    if (s < step) {
      step = s;
      hit = active[a];
    }
  }
  if (hit < 0) return false;
  const double before = reduced_objective(dtx, g, t, cur);
  Code next = cur;
  for (Eigen::Index a = 0; a < k; ++a) next(active[a]) += step * va(a);
  next(j) = sj * step;
  next(hit) = 0.0;
  if (!(reduced_objective(dtx, g, t, next) <= before)) return false;
  cur = next;
  sign = cur.cwiseSign();
  return true;
}

/// Feature-sign active-set search started from z. Each step solves the
/// stationarity equations for the current support and signs, then moves
/// toward that solution, stopping at the best zero crossing when a sign
/// would flip. When the support is sign-consistent the most violating
/// inactive coefficient joins it. Returns true once every optimality
/// condition holds (checked with a fresh factorization); z is only ever
/// replaced by a point with lower objective.
inline bool feature_sign_refine(const Eigen::VectorXd& dtx, const Eigen::MatrixXd& g,
                                const Eigen::Ref<const Eigen::VectorXd>& t, Code& z, int max_steps = 256) {
  const auto n = z.size();
  Code cur = z;
  Eigen::VectorXd sign = cur.cwiseSign();
  ActiveCholesky chol(g);
  Eigen::Index added = -1;
  bool ok = false;
  for (int step = 0; step < max_steps; ++step) {
    if (!chol.sync(sign)) {
      if (added < 0 || !null_space_swap(dtx, g, t, chol, cur, sign, added)) break;
      added = -1;
      continue;
    }
    const auto& active = chol.indices();
    const auto k = static_cast<Eigen::Index>(active.size());

    if (k > 0) {
      Eigen::VectorXd rhs(k);
      for (Eigen::Index a = 0; a < k; ++a) rhs(a) = dtx(active[a]) - t(active[a]) * sign(active[a]);
      const Eigen::VectorXd target = chol.solve(rhs);
      if (!target.allFinite()) break;

      bool consistent = true;
      bool added_flips = false;
      for (Eigen::Index a = 0; a < k; ++a) {
        if (target(a) * sign(active[a]) > 0) continue;
        consistent = false;
        if (active[a] == added) added_flips = true;
      }
      if (added_flips) {
        // The joint step would push the new coefficient the wrong way; an
        // exact single-coordinate step still lowers the objective.
        const double rho = dtx(added) - g.col(added).dot(cur);
        cur(added) = soft_threshold(rho, t(added)) / g(added, added);
        sign = cur.cwiseSign();
        added = -1;
        continue;
      }

      Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
      for (Eigen::Index a = 0; a < k; ++a) dir(active[a]) = target(a) - cur(active[a]);
      Eigen::VectorXd gdir = Eigen::VectorXd::Zero(n);
      for (Eigen::Index a = 0; a < k; ++a) gdir.noalias() += dir(active[a]) * g.col(active[a]);
      // Objective along cur + s * dir: smooth part is quadratic in s.
      const double slope = cur.dot(gdir) - dtx.dot(dir);
      const double curv = dir.dot(gdir);
      auto along = [&](double s) {
        double l1 = 0;
        for (Eigen::Index a = 0; a < k; ++a) l1 += t(active[a]) * std::abs(cur(active[a]) + s * dir(active[a]));
        return s * slope + 0.5 * s * s * curv + l1;
      };
      double best_s = 1.0;
      double best_obj = along(1.0);
      Eigen::Index zeroed = -1;
      if (!consistent) {
        // Candidates: the target and every zero crossing on the way to it.
        for (Eigen::Index a = 0; a < k; ++a) {
          const double from = cur(active[a]);
          const double to = target(a);
          if (from == 0.0 || from * to > 0) continue;
          const double s = from / (from - to);
          const double obj = along(s);
          if (obj < best_obj) {
            best_obj = obj;
            best_s = s;
            zeroed = active[a];
          }
        }
      }
      if (!(best_obj <= along(0.0))) break;
      Code next = cur + best_s * dir;
      if (zeroed >= 0) next(zeroed) = 0.0;
      for (Eigen::Index a = 0; a < k; ++a)
        if (next(active[a]) * sign(active[a]) <= 0) next(active[a]) = 0.0;
      cur = next;
      if (!consistent || zeroed >= 0) {
        sign = cur.cwiseSign();
        continue;
      }
    }

    const Eigen::VectorXd corr = dtx - g * cur;
    Eigen::Index worst = -1;
    double worst_gap = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (sign(j) != 0) continue;
      const double gap = std::abs(corr(j)) - (t(j) * (1.0 + 1e-12) + 1e-12);
      if (gap > worst_gap) {
        worst_gap = gap;
        worst = j;
      }
    }
    if (worst < 0) {
      ok = solve_on_support(dtx, g, t, cur);
      break;
    }
    sign(worst) = corr(worst) > 0 ? 1.0 : -1.0;
    added = worst;
  }
  if (ok || reduced_objective(dtx, g, t, cur) < reduced_objective(dtx, g, t, z)) z = cur;
  return ok;
}

}  // namespace detail

/// Minimizes 1/2||x - Dz||^2 + sum_i t_i |z_i| by cyclic coordinate descent,
/// coefficients visited in index order, stopping when the largest coefficient
/// change in a sweep falls below 1e-8 or after 1000 sweeps.
///
/// Every 50 sweeps the iterate is handed to an active-set search; if that
/// reaches a point meeting the optimality conditions it is returned directly.
/// The first such attempt also tries the search from z = 0.
/// With small thresholds and correlated atoms this ends the slow geometric
/// tail of coordinate descent.
inline Code weighted_lasso_encode(const Eigen::Ref<const Eigen::VectorXd>& x, const Dictionary& dict,
                                  const Eigen::Ref<const Eigen::VectorXd>& thresholds,
                                  SolverStats* stats = nullptr) {
  detail::check_input(x, dict);
  const auto n = dict.size();
  if (thresholds.size() != n) throw UsageError("threshold vector length must equal atom count");
  if (!thresholds.allFinite() || (thresholds.array() < 0).any())
    throw UsageError("thresholds must be finite and >= 0");

  const auto& g = dict.gram();
  const Eigen::VectorXd dtx = dict.atoms().transpose() * x;
  Eigen::VectorXd r = dtx;  // D^T (x - D z), z = 0
  Code z = Code::Zero(n);
  SolverStats s;
  for (; s.sweeps < kCdMaxSweeps;) {
    ++s.sweeps;
    double max_change = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double gjj = g(j, j);
      const double rho = r(j) + gjj * z(j);
      const double updated = detail::soft_threshold(rho, thresholds(j)) / gjj;
      const double delta = updated - z(j);
      if (delta != 0.0) {
        r.noalias() -= delta * g.col(j);
        z(j) = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    s.last_max_change = max_change;
    if (max_change < kCdTolerance) break;
    if (s.sweeps % kCdRefineEvery == 0) {
      if (detail::feature_sign_refine(dtx, g, thresholds, z)) {
        s.polished = true;
        break;
      }
      // A dependent support (more nonzeros than rank) cannot be factored;
      // grow one from scratch instead, once.
      if (s.sweeps == kCdRefineEvery) {
        Code fresh = Code::Zero(n);
        if (detail::feature_sign_refine(dtx, g, thresholds, fresh)) {
          z = fresh;
          s.polished = true;
          break;
        }
      }
      r = dtx - g * z;
    }
  }
  if (!z.allFinite()) throw NumericError("coordinate descent diverged");
  if (stats != nullptr) *stats = s;
  return z;
}

inline Code sparse_encode(const Eigen::Ref<const Eigen::VectorXd>& x, const Dictionary& dict, double lambda,
                          SolverStats* stats = nullptr) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw UsageError("lambda must be a positive finite number");
  return weighted_lasso_encode(x, dict, Eigen::VectorXd::Constant(dict.size(), lambda), stats);
}

/// 1/2||x - Dz||^2 + lambda * sum|z_i|
inline double lasso_objective(const Eigen::Ref<const Eigen::VectorXd>& x, const Dictionary& dict,
                              const Eigen::Ref<const Eigen::VectorXd>& z, double lambda) {
  return 0.5 * (x - dict.atoms() * z).squaredNorm() + lambda * z.lpNorm<1>();
}

/// Per-atom Euclidean distance to the input.
inline Eigen::VectorXd locality_adaptor(const Eigen::Ref<const Eigen::VectorXd>& x, const Dictionary& dict) {
  detail::check_input(x, dict);
  Eigen::VectorXd d(dict.size());
  for (Eigen::Index i = 0; i < dict.size(); ++i) d(i) = (x - dict.atom(i)).norm();
  return d;
}

/// How the locality penalty lambda * d_i is applied.
enum class LlcVariant {
  closed_form,  // sum-to-one constrained least squares with lambda * sum d_i z_i^2
  weighted_l1,  // weighted LASSO with thresholds lambda * d_i
};

/// Locality-constrained code via the analytic solution
///   z~ = (Z + lambda diag(d) + ridge I) \ 1,   z = z~ / (1^T z~)
/// with Z = (D - x 1^T)^T (D - x 1^T) and ridge = 1e-8 * trace(Z) / n.
inline Code llc_encode(const Eigen::Ref<const Eigen::VectorXd>& x, const Dictionary& dict, double lambda,
                       LlcVariant variant = LlcVariant::closed_form) {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw UsageError("lambda must be a finite number >= 0");
  const Eigen::VectorXd d = locality_adaptor(x, dict);
  if (variant == LlcVariant::weighted_l1) return weighted_lasso_encode(x, dict, lambda * d);

  const auto n = dict.size();
  const Eigen::VectorXd c = dict.atoms().transpose() * x;
  const double xx = x.squaredNorm();
  // (D - x1^T)^T (D - x1^T) = G - c 1^T - 1 c^T + (x^T x) 1 1^T
  Eigen::MatrixXd system = dict.gram();
  system.colwise() -= c;
  system.rowwise() -= c.transpose();
  system.array() += xx;
  const double ridge = kLlcRidge * system.trace() / static_cast<double>(n);
  system.diagonal() += lambda * d + Eigen::VectorXd::Constant(n, ridge);

  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) throw NumericError("locality-constrained system is singular");
  Code z = llt.solve(Eigen::VectorXd::Ones(n));
  const double total = z.sum();
  if (!z.allFinite() || !(std::abs(total) > 0) || !std::isfinite(total))
    throw NumericError("locality-constrained system is singular (degenerate dictionary)");
  return z / total;
}

/// K centers in code space, one per column.
struct GaussianCenters {
  Eigen::MatrixXd centers;  // n x K

  int count() const { return static_cast<int>(centers.cols()); }

  /// Nearest center by Euclidean distance; ties go to the lowest index.
  int nearest(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < count(); ++k) {
      const double dist = (centers.col(k) - z).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
    return best;
  }
};

/// k-means (k-means++ seeding, at most 100 Lloyd iterations) over codes
/// stored as columns.
inline GaussianCenters fit_gaussian_centers(const Eigen::MatrixXd& codes, int k, std::uint64_t seed) {
  if (k < 1) throw UsageError("K must be >= 1");
  if (k > codes.cols()) throw UsageError("K exceeds the number of codes");
  if (!codes.allFinite()) throw NumericError("non-finite codes");
  return GaussianCenters{kmeans(codes, k, seed, 100).centers};
}

/// HLSC weights: w_i = |z0_i - c*_i| + 1e-3, with c* the center nearest z0.
inline Eigen::VectorXd hlsc_weights(const Eigen::Ref<const Eigen::VectorXd>& z0, const GaussianCenters& centers) {
  if (centers.count() < 1) throw UsageError("no Gaussian centers");
  if (centers.centers.rows() != z0.size()) throw UsageError("center dimension does not match code length");
  const int k = centers.nearest(z0);
  return (z0 - centers.centers.col(k)).cwiseAbs().array() + kHlscWeightFloor;
}

/// Two-stage hierarchical code: z0 = llc_encode(x), weights from the nearest
/// center, then the weighted LASSO with thresholds lambda * w_i.
inline Code hlsc_encode(const Eigen::Ref<const Eigen::VectorXd>& x, const Dictionary& dict, double lambda,
                        const GaussianCenters& centers, SolverStats* stats = nullptr) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw UsageError("lambda must be a positive finite number");
  const Code z0 = llc_encode(x, dict, lambda);
  const Eigen::VectorXd w = hlsc_weights(z0, centers);
  return weighted_lasso_encode(x, dict, lambda * w, stats);
}

}  // namespace cfp
