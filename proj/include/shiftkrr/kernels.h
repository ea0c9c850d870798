#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <string_view>

namespace shiftkrr {

/// Covariates, one point per row. Sobolev inputs are single-column in [0, 1].
using CovariateMatrix = Eigen::MatrixXd;

/// Default cap on the number of rows a dense Gram matrix may have.
inline constexpr Eigen::Index kDefaultMaxGramRows = 10000;

enum class KernelKind { Linear, Affine, Polynomial, Gaussian, Laplace, Sobolev };

/*
 * Tagged description of a reproducing kernel:
 *
 *   Linear      K(z, w) = z'w
 *   Affine      K(z, w) = 1 + z'w
 *   Polynomial  K(z, w) = (z'w)^m  or  (1 + z'w)^m,  m >= 2
 *   Gaussian    K(z, w) = exp(-alpha |z - w|^2)
 *   Laplace     K(z, w) = exp(-alpha |z - w|)
 *   Sobolev     K(z, w) = min(z, w) on [0, 1]
 *
 * Construct through the named factories; they enforce the parameter
 * invariants. The affine and inhomogeneous polynomial kernels are evaluated
 * on all of R^d; boundedness of the feature map is the caller's concern.
 */
class KernelSpec {
 public:
  static KernelSpec linear();
  static KernelSpec affine();
  static KernelSpec polynomial(int degree, bool homogeneous);
  static KernelSpec gaussian(double alpha);
  static KernelSpec laplace(double alpha);
  static KernelSpec sobolev();

  /// Parses `linear`, `affine`, `poly:m=3:hom=false`, `gauss:alpha=2.0`,
  /// `laplace:alpha=1.0` or `sobolev`.
  static KernelSpec parse(std::string_view text);
  std::string to_string() const;

  KernelKind kind() const { return kind_; }
  int degree() const { return degree_; }
  bool homogeneous() const { return homogeneous_; }
  double bandwidth() const { return alpha_; }

  bool operator==(const KernelSpec &other) const = default;

 private:
  KernelSpec(KernelKind kind, int degree, bool homogeneous, double alpha)
      : kind_(kind), degree_(degree), homogeneous_(homogeneous), alpha_(alpha) {}

  KernelKind kind_;
  int degree_;
  bool homogeneous_;
  double alpha_;
};

/// Throws InvalidArgument unless X is non-empty, finite and (for Sobolev)
/// single-column with entries in [0, 1].
void validate_covariates(const KernelSpec &spec, const CovariateMatrix &X);

/// K(z, w). Symmetric bit-for-bit: eval_kernel(s, z, w) == eval_kernel(s, w, z).
double eval_kernel(const KernelSpec &spec, const Eigen::Ref<const Eigen::VectorXd> &z,
                   const Eigen::Ref<const Eigen::VectorXd> &w);

/// n x n Gram matrix. The lower triangle is computed once and mirrored.
Eigen::MatrixXd gram_matrix(const KernelSpec &spec, const CovariateMatrix &X,
                            Eigen::Index max_rows = kDefaultMaxGramRows);

/// n_test x n_train matrix with entry (t, i) = K(x_test_t, x_train_i).
Eigen::MatrixXd cross_gram(const KernelSpec &spec, const CovariateMatrix &X_train,
                           const CovariateMatrix &X_test);

}  // namespace shiftkrr
