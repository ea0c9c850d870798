#pragma once

#include <Eigen/Dense>
#include <string>

#include "shiftkrr/kernels.h"

namespace shiftkrr {

/// Relative residual tolerance of the dual system that every fit must meet.
inline constexpr double kNormalEquationTolerance = 1e-8;

/*
 * A fitted kernel ridge regression model
 *
 *   f(x) = sum_i alpha_i K(x_i, x)
 *
 * where alpha solves (K + n * lambda * I) alpha = y. The n * lambda scaling
 * comes from the mean squared loss in the objective
 *
 *   (1/n) sum_i (f(x_i) - y_i)^2 + lambda |f|^2.
 *
 * Immutable once constructed.
 */
class KrrModel {
 public:
  KrrModel(KernelSpec kernel, CovariateMatrix train_x, Eigen::VectorXd alpha, double lambda);

  const KernelSpec &kernel() const { return kernel_; }
  const CovariateMatrix &train_x() const { return train_x_; }
  const Eigen::VectorXd &alpha() const { return alpha_; }
  double lambda() const { return lambda_; }
  Eigen::Index size() const { return train_x_.rows(); }

  /// Versioned JSON record (kernel string, lambda, training points, alpha).
  std::string to_json() const;
  static KrrModel from_json(const std::string &text);

 private:
  KernelSpec kernel_;
  CovariateMatrix train_x_;
  Eigen::VectorXd alpha_;
  double lambda_;
};

KrrModel fit_krr(const KernelSpec &spec, const CovariateMatrix &X, const Eigen::VectorXd &y,
                 double lambda);

/// Same as fit_krr with a precomputed Gram matrix of X, so a penalty grid can
/// share one Gram construction. `gram` must equal gram_matrix(spec, X).
KrrModel fit_krr_with_gram(const KernelSpec &spec, const CovariateMatrix &X,
                           const Eigen::MatrixXd &gram, const Eigen::VectorXd &y, double lambda);

Eigen::VectorXd predict(const KrrModel &model, const CovariateMatrix &X_new);

/// alpha' K alpha, clamped at zero when round-off makes it slightly negative.
double rkhs_norm_sq(const KrrModel &model);

double empirical_mse(const KrrModel &model, const CovariateMatrix &X, const Eigen::VectorXd &y);

/// |(K + n lambda I) alpha - y| / max(|y|, 1) for the model's own training set.
double normal_equation_residual(const KrrModel &model, const Eigen::VectorXd &y);

}  // namespace shiftkrr
