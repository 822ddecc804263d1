#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "cfp/coding.hpp"
#include "cfp/errors.hpp"
#include "cfp/kmeans.hpp"

namespace cfp {

struct DictionaryLearningOptions {
  int n_atoms = 128;
  double lambda = 0.15;
  int max_outer = 10;
  /// Lloyd iterations for the k-means initialization.
  int init_iterations = 20;
  double relative_tolerance = 1e-5;
  std::uint64_t seed = 0;
};

struct DictionaryLearningResult {
  Dictionary dictionary;
  /// Total objective after each encode step.
  std::vector<double> objective_after_encode;
  /// Total objective after each atom update, with the codes of that iteration.
  std::vector<double> objective_after_update;
};

/// Encodes every column of `samples`; codes are returned as columns.
inline Eigen::MatrixXd sparse_encode_all(const Eigen::MatrixXd& samples, const Dictionary& dict, double lambda) {
  Eigen::MatrixXd codes(dict.size(), samples.cols());
  for (Eigen::Index i = 0; i < samples.cols(); ++i) codes.col(i) = sparse_encode(samples.col(i), dict, lambda);
  return codes;
}

inline double total_lasso_objective(const Eigen::MatrixXd& samples, const Dictionary& dict,
                                    const Eigen::MatrixXd& codes, double lambda) {
  return 0.5 * (samples - dict.atoms() * codes).squaredNorm() + lambda * codes.cwiseAbs().sum();
}

/// Alternating minimization of sum_x 1/2||x - Dz||^2 + lambda|z|_1 over
/// unit-norm atoms. Samples are columns.
///
/// The atom step visits atoms in order and sets each to the exact minimizer
/// on the unit sphere given the codes and the other atoms: the least-squares
/// solution of its residual, renormalized. Both steps are exact block
/// minimizations, so the objective never increases.
inline DictionaryLearningResult learn_dictionary(const Eigen::MatrixXd& samples,
                                                 const DictionaryLearningOptions& opt = {}) {
  if (opt.n_atoms < 2) throw UsageError("n_atoms must be >= 2");
  if (samples.cols() < opt.n_atoms) throw DataError("fewer samples than atoms");
  if (!(opt.lambda > 0)) throw UsageError("lambda must be positive");
  if (!samples.allFinite()) throw NumericError("non-finite training samples");
  if (samples.cwiseAbs().maxCoeff() == 0.0) throw DataError("training samples are all zero");

  Eigen::MatrixXd atoms = kmeans(samples, opt.n_atoms, opt.seed, opt.init_iterations).centers;
  Rng fallback(derive_seed(opt.seed, 0xd1c7));
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    double n = atoms.col(j).norm();
    // A centroid at the origin has no direction; borrow a nonzero sample.
    while (!(n > 0)) {
      atoms.col(j) = samples.col(fallback.uniform_int(0, samples.cols() - 1));
      n = atoms.col(j).norm();
    }
    atoms.col(j) /= n;
  }

  DictionaryLearningResult res;
  res.dictionary = Dictionary(atoms);
  double previous = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    const Eigen::MatrixXd codes = sparse_encode_all(samples, res.dictionary, opt.lambda);
    const double obj = total_lasso_objective(samples, res.dictionary, codes, opt.lambda);
    res.objective_after_encode.push_back(obj);
    if (std::isfinite(previous) && std::abs(previous - obj) <= opt.relative_tolerance * std::abs(previous)) break;
    previous = obj;

    const Eigen::MatrixXd zz = codes * codes.transpose();
    const Eigen::MatrixXd xz = samples * codes.transpose();
    for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
      if (zz(j, j) == 0.0) continue;  // unused atom: nothing constrains it
      Eigen::VectorXd u = xz.col(j) - atoms * zz.col(j) + atoms.col(j) * zz(j, j);
      const double n = u.norm();
      if (!(n > 0)) continue;
      atoms.col(j) = u / n;
    }
    res.dictionary = Dictionary(atoms);
    res.objective_after_update.push_back(total_lasso_objective(samples, res.dictionary, codes, opt.lambda));
  }
  return res;
}

}  // namespace cfp
