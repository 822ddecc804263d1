#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "cfp/errors.hpp"
#include "cfp/random.hpp"

namespace cfp {

// Features are stored one sample per row (N x p) throughout this header.

namespace detail {

inline std::vector<int> sorted_classes(const std::vector<int>& labels) {
  std::vector<int> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

/// Flips each column so its largest-magnitude entry is positive (first one on ties).
inline void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index arg = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, j) < 0) vectors.col(j) *= -1.0;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fisher LDA

struct LdaModel {
  Eigen::MatrixXd projection;             // p x q
  Eigen::MatrixXd class_means_projected;  // q x C, columns follow `classes`
  Eigen::VectorXd global_mean;            // p
  Eigen::VectorXd eigenvalues;            // q, descending
  std::vector<int> classes;
  double shrinkage = 1e-4;
  /// True when the requested output dimension was reduced.
  bool clamped = false;

  Eigen::Index input_dim() const { return projection.rows(); }
  Eigen::Index output_dim() const { return projection.cols(); }
};

/// Within-class scatter S_w and between-class scatter S_b.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> class_scatter(const Eigen::MatrixXd& features,
                                                                 const std::vector<int>& labels) {
  const auto p = features.cols();
  const Eigen::RowVectorXd mean = features.colwise().mean();
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(p, p);
  for (int c : detail::sorted_classes(labels)) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) rows.push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd block(static_cast<Eigen::Index>(rows.size()), p);
    for (std::size_t k = 0; k < rows.size(); ++k) block.row(static_cast<Eigen::Index>(k)) = features.row(rows[k]);
    const Eigen::RowVectorXd mu = block.colwise().mean();
    const Eigen::MatrixXd centered = block.rowwise() - mu;
    sw.noalias() += centered.transpose() * centered;
    const Eigen::VectorXd diff = (mu - mean).transpose();
    sb.noalias() += static_cast<double>(rows.size()) * diff * diff.transpose();
  }
  return {sw, sb};
}

/// Solves S_b w = lambda (S_w + gamma I) w with gamma = shrinkage * trace(S_w) / p
/// and keeps the top q = min(out_dim, C - 1, p) directions.
inline LdaModel fit_lda(const Eigen::MatrixXd& features, const std::vector<int>& labels, int out_dim,
                        double shrinkage = 1e-4) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw UsageError("feature rows and label count differ");
  if (!features.allFinite()) throw NumericError("non-finite LDA features");
  if (out_dim < 1) throw UsageError("LDA output dimension must be >= 1");
  if (!(shrinkage >= 0)) throw UsageError("LDA shrinkage must be >= 0");
  const auto classes = detail::sorted_classes(labels);
  const auto n_classes = static_cast<int>(classes.size());
  if (n_classes < 2) throw DataError("LDA needs at least two classes");
  const auto p = features.cols();

  LdaModel model;
  model.classes = classes;
  model.shrinkage = shrinkage;
  const int q = std::min<int>({out_dim, n_classes - 1, static_cast<int>(p)});
  model.clamped = q < out_dim;
  model.global_mean = features.colwise().mean().transpose();

  auto [sw, sb] = class_scatter(features, labels);
  if (!(sw.trace() > 0)) throw DataError("within-class scatter is zero; LDA needs two or more samples in some class");
  const double gamma = shrinkage * sw.trace() / static_cast<double>(p);
  sw.diagonal().array() += gamma;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sb, sw, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success) throw NumericError("within-class scatter is singular; increase shrinkage");
  // Eigen returns ascending eigenvalues.
  model.projection.resize(p, q);
  model.eigenvalues.resize(q);
  for (int k = 0; k < q; ++k) {
    model.projection.col(k) = ges.eigenvectors().col(p - 1 - k);
    model.eigenvalues(k) = ges.eigenvalues()(p - 1 - k);
  }
  detail::fix_signs(model.projection);

  model.class_means_projected.resize(q, n_classes);
  for (int ci = 0; ci < n_classes; ++ci) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
    int count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == classes[ci]) {
        mu += features.row(static_cast<Eigen::Index>(i)).transpose();
        ++count;
      }
    mu /= count;
    model.class_means_projected.col(ci) = model.projection.transpose() * (mu - model.global_mean);
  }
  return model;
}

/// W^T (x - mean)
inline Eigen::VectorXd lda_project(const LdaModel& model, const Eigen::Ref<const Eigen::VectorXd>& feature) {
  if (feature.size() != model.input_dim()) throw UsageError("feature dimension does not match LDA model");
  return model.projection.transpose() * (feature - model.global_mean);
}

/// Row-wise projection of an N x p matrix.
inline Eigen::MatrixXd lda_project_rows(const LdaModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.input_dim()) throw UsageError("feature dimension does not match LDA model");
  return (features.rowwise() - model.global_mean.transpose()) * model.projection;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  Eigen::MatrixXd projection;  // p x q, orthonormal columns
  Eigen::VectorXd mean;        // p
  Eigen::VectorXd explained;   // q eigenvalues of the sample covariance, descending

  Eigen::Index input_dim() const { return projection.rows(); }
  Eigen::Index output_dim() const { return projection.cols(); }
};

/// Top-q eigenvectors of the sample covariance (divisor N - 1). When N < p the
/// eigenproblem is solved on the N x N Gram matrix of the centered data
/// instead, which has the same nonzero spectrum.
inline PcaModel fit_pca(const Eigen::MatrixXd& features, int out_dim) {
  const auto n = features.rows();
  const auto p = features.cols();
  if (n < 2) throw DataError("PCA needs at least two samples");
  if (out_dim < 1 || out_dim > std::min<Eigen::Index>(n - 1, p))
    throw UsageError("PCA output dimension must be in [1, min(N - 1, p)]");
  if (!features.allFinite()) throw NumericError("non-finite PCA features");

  PcaModel model;
  model.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - model.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  model.projection.resize(p, out_dim);
  model.explained.resize(out_dim);

  if (n >= p) {
    const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    for (int k = 0; k < out_dim; ++k) {
      model.projection.col(k) = es.eigenvectors().col(p - 1 - k);
      model.explained(k) = std::max(0.0, es.eigenvalues()(p - 1 - k));
    }
  } else {
    const Eigen::MatrixXd gram = centered * centered.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    for (int k = 0; k < out_dim; ++k) {
      Eigen::VectorXd v = centered.transpose() * es.eigenvectors().col(n - 1 - k);
      const double norm = v.norm();
      if (!(norm > 0)) throw NumericError("PCA component has zero variance");
      model.projection.col(k) = v / norm;
      model.explained(k) = std::max(0.0, es.eigenvalues()(n - 1 - k));
    }
  }
  detail::fix_signs(model.projection);
  return model;
}

inline Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& feature) {
  if (feature.size() != model.input_dim()) throw UsageError("feature dimension does not match PCA model");
  return model.projection.transpose() * (feature - model.mean);
}

inline Eigen::MatrixXd pca_project_rows(const PcaModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.input_dim()) throw UsageError("feature dimension does not match PCA model");
  return (features.rowwise() - model.mean.transpose()) * model.projection;
}

inline Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& coords) {
  return model.mean + model.projection * coords;
}

// ---------------------------------------------------------------------------
// Linear one-vs-rest SVM

struct SvmModel {
  Eigen::MatrixXd weights;  // C x q, row k belongs to classes[k]
  Eigen::VectorXd bias;     // C
  std::vector<int> classes;
  double c = 0.1;

  Eigen::Index input_dim() const { return weights.cols(); }
};

/// Per-epoch primal objective of the averaged iterate, one vector per class.
struct SvmTrace {
  std::vector<std::vector<double>> objective;
};

/// 1/2 (||w||^2 + b^2) + C * sum_i max(0, 1 - y_i (w^T x_i + b)); the bias is
/// an extra constant feature and is regularized with the weights.
inline double svm_primal_objective(const Eigen::MatrixXd& features, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& w, double b, double c) {
  const Eigen::VectorXd margins = (features * w).array() + b;
  const double hinge = (1.0 - (y.array() * margins.array())).max(0.0).sum();
  return 0.5 * (w.squaredNorm() + b * b) + c * hinge;
}

/// One-vs-rest training by averaged stochastic subgradient descent (Pegasos
/// schedule eta_t = 1 / (lambda t) with lambda = 1 / (C N), projection onto the
/// ball of radius 1 / sqrt(lambda)). Each epoch visits all samples in a
/// seeded shuffled order; the returned weights are the average of all iterates.
inline SvmModel train_linear_svm(const Eigen::MatrixXd& features, const std::vector<int>& labels, double c = 0.1,
                                 std::uint64_t seed = 0, int epochs = 200, SvmTrace* trace = nullptr) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw UsageError("feature rows and label count differ");
  if (!(c > 0)) throw UsageError("SVM regularization C must be positive");
  if (epochs < 1) throw UsageError("SVM epochs must be >= 1");
  if (!features.allFinite()) throw NumericError("non-finite SVM features");
  const auto classes = detail::sorted_classes(labels);
  if (classes.size() < 2) throw DataError("SVM needs at least two classes");

  const auto n = features.rows();
  const auto q = features.cols();
  const double lambda = 1.0 / (c * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);

  SvmModel model;
  model.classes = classes;
  model.c = c;
  model.weights.resize(static_cast<Eigen::Index>(classes.size()), q);
  model.bias.resize(static_cast<Eigen::Index>(classes.size()));
  if (trace != nullptr) trace->objective.assign(classes.size(), {});

  for (std::size_t k = 0; k < classes.size(); ++k) {
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[i] == classes[k] ? 1.0 : -1.0;
    Rng rng(derive_seed(seed, 0x5f3, k));
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);

    Eigen::VectorXd w = Eigen::VectorXd::Zero(q);
    double b = 0;
    Eigen::VectorXd w_avg = Eigen::VectorXd::Zero(q);
    double b_avg = 0;
    std::int64_t t = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      rng.shuffle(order);
      for (Eigen::Index i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double margin = y(i) * (features.row(i).dot(w) + b);
        const double shrink = 1.0 - eta * lambda;
        w *= shrink;
        b *= shrink;
        if (margin < 1.0) {
          w.noalias() += (eta * y(i)) * features.row(i).transpose();
          b += eta * y(i);
        }
        const double norm = std::sqrt(w.squaredNorm() + b * b);
        if (norm > radius) {
          w *= radius / norm;
          b *= radius / norm;
        }
        const double a = 1.0 / static_cast<double>(t);
        w_avg += a * (w - w_avg);
        b_avg += a * (b - b_avg);
      }
      if (trace != nullptr) trace->objective[k].push_back(svm_primal_objective(features, y, w_avg, b_avg, c));
    }
    model.weights.row(static_cast<Eigen::Index>(k)) = w_avg.transpose();
    model.bias(static_cast<Eigen::Index>(k)) = b_avg;
  }
  return model;
}

/// w_k^T x + b_k for every class.
inline Eigen::VectorXd svm_decision(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& feature) {
  if (feature.size() != model.input_dim()) throw UsageError("feature dimension does not match SVM model");
  return model.weights * feature + model.bias;
}

/// Class with the largest score; ties go to the lowest class id.
inline int svm_predict(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& feature) {
  const Eigen::VectorXd scores = svm_decision(model, feature);
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k)
    if (scores(k) > scores(best)) best = k;
  return model.classes[static_cast<std::size_t>(best)];
}

}  // namespace cfp
