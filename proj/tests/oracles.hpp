#pragma once

// Reference computations used only by the tests. Each one solves the same
// problem as a library routine by a different route (enumeration, a direct
// linear system, counting) so the two can be compared.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cfp/random.hpp"

namespace oracle {

inline Eigen::MatrixXd random_matrix(cfp::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

inline Eigen::VectorXd random_vector(cfp::Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

/// Random matrix with unit-norm columns.
inline Eigen::MatrixXd random_atoms(cfp::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m = random_matrix(rng, rows, cols);
  m.colwise().normalize();
  return m;
}

/// Random orthonormal basis of R^n (Q of a Gaussian matrix).
inline Eigen::MatrixXd random_orthonormal(cfp::Rng& rng, Eigen::Index n) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n, n));
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

inline double weighted_lasso_objective(const Eigen::MatrixXd& d, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& t, const Eigen::VectorXd& z) {
  return 0.5 * (x - d * z).squaredNorm() + t.dot(z.cwiseAbs());
}

struct LassoOptimum {
  Eigen::VectorXd z;
  double objective = std::numeric_limits<double>::infinity();
};

/// Global minimizer of 1/2||x - Dz||^2 + sum t_i |z_i| by enumerating every
/// sign pattern in {-1, 0, +1}^n with at most `max_support` nonzeros. For each
/// pattern the stationarity equations D_S^T D_S z_S = D_S^T x - t_S s_S are
/// solved; a solution whose signs match the pattern is a candidate. The
/// minimizer has some sign pattern and is stationary for it, so the best
/// candidate is the optimum whenever its support size is within the bound.
inline LassoOptimum brute_force_lasso(const Eigen::MatrixXd& d, const Eigen::VectorXd& x, const Eigen::VectorXd& t,
                                      int max_support) {
  const auto n = static_cast<int>(d.cols());
  LassoOptimum best;
  best.z = Eigen::VectorXd::Zero(n);
  best.objective = weighted_lasso_objective(d, x, t, best.z);
  std::vector<int> signs(static_cast<std::size_t>(n), 0);
  long total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (long code = 1; code < total; ++code) {
    long c = code;
    int support = 0;
    for (int i = 0; i < n; ++i) {
      signs[static_cast<std::size_t>(i)] = static_cast<int>(c % 3) - 1;
      c /= 3;
      if (signs[static_cast<std::size_t>(i)] != 0) ++support;
    }
    if (support == 0 || support > max_support) continue;
    Eigen::MatrixXd ds(d.rows(), support);
    Eigen::VectorXd ts(support);
    Eigen::VectorXd ss(support);
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (signs[static_cast<std::size_t>(i)] != 0) {
        const auto k = static_cast<Eigen::Index>(idx.size());
        ds.col(k) = d.col(i);
        ts(k) = t(i);
        ss(k) = signs[static_cast<std::size_t>(i)];
        idx.push_back(i);
      }
    const Eigen::MatrixXd gram = ds.transpose() * ds;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (lu.rank() < support) continue;
    const Eigen::VectorXd zs = lu.solve(ds.transpose() * x - ts.cwiseProduct(ss));
    bool consistent = true;
    for (int k = 0; k < support; ++k)
      if (!(zs(k) * ss(k) > 0)) consistent = false;
    if (!consistent) continue;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < support; ++k) z(idx[static_cast<std::size_t>(k)]) = zs(k);
    const double obj = weighted_lasso_objective(d, x, t, z);
    if (obj < best.objective) {
      best.objective = obj;
      best.z = z;
    }
  }
  return best;
}

/// Largest violation of the weighted LASSO optimality conditions:
///   z_i != 0: D_i^T (x - Dz) = t_i sign(z_i)
///   z_i == 0: |D_i^T (x - Dz)| <= t_i
inline double lasso_kkt_residual(const Eigen::MatrixXd& d, const Eigen::VectorXd& x, const Eigen::VectorXd& t,
                                 const Eigen::VectorXd& z) {
  const Eigen::VectorXd corr = d.transpose() * (x - d * z);
  double worst = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double v = z(i) != 0 ? std::abs(corr(i) - t(i) * (z(i) > 0 ? 1.0 : -1.0))
                               : std::max(0.0, std::abs(corr(i)) - t(i));
    worst = std::max(worst, v);
  }
  return worst;
}

/// Minimizer of ||x - Dz||^2 + sum (lambda d_i + r) z_i^2 subject to 1^T z = 1,
/// with d_i = ||x - D_i|| and r = ridge_scale * sum_i d_i^2 / n, from the
/// bordered KKT system
///   [ 2 (D^T D + diag(lambda d + r))  1 ] [z ]   [2 D^T x]
///   [ 1^T                             0 ] [mu] = [1      ].
inline Eigen::VectorXd llc_kkt(const Eigen::MatrixXd& d, const Eigen::VectorXd& x, double lambda,
                               double ridge_scale = 1e-8) {
  const auto n = d.cols();
  Eigen::VectorXd dist(n);
  for (Eigen::Index i = 0; i < n; ++i) dist(i) = (x - d.col(i)).norm();
  const double r = ridge_scale * dist.squaredNorm() / static_cast<double>(n);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n + 1, n + 1);
  k.topLeftCorner(n, n) = 2.0 * (d.transpose() * d);
  k.topLeftCorner(n, n).diagonal() += 2.0 * (lambda * dist.array() + r).matrix();
  k.block(0, n, n, 1).setOnes();
  k.block(n, 0, 1, n).setOnes();
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = 2.0 * d.transpose() * x;
  rhs(n) = 1.0;
  return k.fullPivLu().solve(rhs).head(n);
}

/// Fisher direction for two classes: S_w^{-1} (mu_1 - mu_2), S_w the pooled
/// within-class scatter. Rows are samples.
inline Eigen::VectorXd fisher_two_class(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::RowVectorXd ma = a.colwise().mean();
  const Eigen::RowVectorXd mb = b.colwise().mean();
  const Eigen::MatrixXd ca = a.rowwise() - ma;
  const Eigen::MatrixXd cb = b.rowwise() - mb;
  const Eigen::MatrixXd sw = ca.transpose() * ca + cb.transpose() * cb;
  return sw.fullPivLu().solve((ma - mb).transpose());
}

inline double abs_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

/// Between/within scatter ratio of 1-D projections (rows of `proj`).
inline double fisher_ratio(const Eigen::VectorXd& proj, const std::vector<int>& labels) {
  const double mean = proj.mean();
  std::vector<int> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  double between = 0;
  double within = 0;
  for (int c : classes) {
    double sum = 0;
    int count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) {
        sum += proj(static_cast<Eigen::Index>(i));
        ++count;
      }
    const double mu = sum / count;
    between += count * (mu - mean) * (mu - mean);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) within += std::pow(proj(static_cast<Eigen::Index>(i)) - mu, 2);
  }
  return between / within;
}

struct Rates {
  double far = 0;
  double frr = 0;
};

/// Direct count at one threshold: impostors accepted (score >= t) and
/// genuines rejected (score < t).
inline Rates count_rates(const std::vector<double>& genuine, const std::vector<double>& impostor, double t) {
  double fa = 0;
  double fr = 0;
  for (double s : impostor)
    if (s >= t) fa += 1;
  for (double s : genuine)
    if (s < t) fr += 1;
  return {fa / static_cast<double>(impostor.size()), fr / static_cast<double>(genuine.size())};
}

/// Optimal value of the one-vs-rest SVM primal
///   1/2 (||w||^2 + b^2) + C sum max(0, 1 - y_i (w^T x_i + b))
/// by dual coordinate descent on the bias-augmented data, run to a tiny
/// projected-gradient tolerance.
inline double svm_dual_optimum(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c) {
  const auto n = x.rows();
  Eigen::MatrixXd xa(n, x.cols() + 1);
  xa << x, Eigen::VectorXd::Ones(n);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(xa.cols());
  const Eigen::VectorXd qii = xa.rowwise().squaredNorm();
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double worst = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = y(i) * xa.row(i).dot(w) - 1.0;
      double pg = g;
      if (alpha(i) == 0) pg = std::min(g, 0.0);
      if (alpha(i) == c) pg = std::max(g, 0.0);
      worst = std::max(worst, std::abs(pg));
      if (pg != 0) {
        const double old = alpha(i);
        alpha(i) = std::clamp(old - g / qii(i), 0.0, c);
        w += (alpha(i) - old) * y(i) * xa.row(i).transpose();
      }
    }
    if (worst < 1e-10) break;
  }
  const Eigen::VectorXd margins = xa * w;
  const double hinge = (1.0 - (y.array() * margins.array())).max(0.0).sum();
  return 0.5 * w.squaredNorm() + c * hinge;
}

}  // namespace oracle
