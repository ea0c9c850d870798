#include "shiftkrr/kernels.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "shiftkrr/errors.h"
#include "shiftkrr/textio.h"

namespace shiftkrr {

KernelSpec KernelSpec::linear() { return {KernelKind::Linear, 1, true, 0.0}; }

KernelSpec KernelSpec::affine() { return {KernelKind::Affine, 1, false, 0.0}; }

KernelSpec KernelSpec::polynomial(int degree, bool homogeneous) {
  require(degree >= 2, "polynomial kernel degree must be >= 2");
  return {KernelKind::Polynomial, degree, homogeneous, 0.0};
}

KernelSpec KernelSpec::gaussian(double alpha) {
  require(std::isfinite(alpha) && alpha > 0.0, "gaussian bandwidth must be positive");
  return {KernelKind::Gaussian, 0, false, alpha};
}

KernelSpec KernelSpec::laplace(double alpha) {
  require(std::isfinite(alpha) && alpha > 0.0, "laplace bandwidth must be positive");
  return {KernelKind::Laplace, 0, false, alpha};
}

KernelSpec KernelSpec::sobolev() { return {KernelKind::Sobolev, 0, false, 0.0}; }

namespace {

std::vector<std::string_view> split_on(std::string_view text, char separator) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(separator, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) {
      return parts;
    }
    start = pos + 1;
  }
}

// Returns the value of `key=value`, or throws.
std::string_view expect_field(std::string_view field, std::string_view key,
                              std::string_view whole) {
  if (field.size() <= key.size() || field.substr(0, key.size()) != key ||
      field[key.size()] != '=') {
    throw InvalidArgument("bad kernel spec '" + std::string(whole) + "': expected " +
                          std::string(key) + "=...");
  }
  return field.substr(key.size() + 1);
}

}  // namespace

KernelSpec KernelSpec::parse(std::string_view text) {
  auto parts = split_on(text, ':');
  std::string_view name = parts.front();
  auto arity = [&](std::size_t expected) {
    if (parts.size() != expected) {
      throw InvalidArgument("bad kernel spec '" + std::string(text) + "'");
    }
  };
  if (name == "linear") {
    arity(1);
    return linear();
  }
  if (name == "affine") {
    arity(1);
    return affine();
  }
  if (name == "sobolev") {
    arity(1);
    return sobolev();
  }
  if (name == "gauss" || name == "laplace") {
    arity(2);
    double alpha = parse_double(expect_field(parts[1], "alpha", text));
    return name == "gauss" ? gaussian(alpha) : laplace(alpha);
  }
  if (name == "poly") {
    arity(3);
    long long degree = parse_int(expect_field(parts[1], "m", text));
    std::string_view hom = expect_field(parts[2], "hom", text);
    if (hom != "true" && hom != "false") {
      throw InvalidArgument("bad kernel spec '" + std::string(text) + "': hom must be true/false");
    }
    require(degree >= 2 && degree <= 64, "polynomial kernel degree must be in [2, 64]");
    return polynomial(static_cast<int>(degree), hom == "true");
  }
  throw InvalidArgument("unknown kernel '" + std::string(text) + "'");
}

std::string KernelSpec::to_string() const {
  switch (kind_) {
    case KernelKind::Linear:
      return "linear";
    case KernelKind::Affine:
      return "affine";
    case KernelKind::Polynomial:
      return "poly:m=" + std::to_string(degree_) + ":hom=" + (homogeneous_ ? "true" : "false");
    case KernelKind::Gaussian:
      return "gauss:alpha=" + format_double(alpha_);
    case KernelKind::Laplace:
      return "laplace:alpha=" + format_double(alpha_);
    case KernelKind::Sobolev:
      return "sobolev";
  }
  return {};
}

namespace {

// Every kernel value goes through here so that gram_matrix, cross_gram and
// eval_kernel agree bit-for-bit. Accumulation order is fixed (k = 0..d-1);
// each term is symmetric in (z, w), hence so is the result.
double evaluate(const KernelSpec &spec, const double *z, const double *w, Eigen::Index dim) {
  switch (spec.kind()) {
    case KernelKind::Sobolev:
      return std::min(z[0], w[0]);
    case KernelKind::Linear:
    case KernelKind::Affine:
    case KernelKind::Polynomial: {
      double dot = 0.0;
      for (Eigen::Index k = 0; k < dim; ++k) {
        dot += z[k] * w[k];
      }
      if (spec.kind() == KernelKind::Linear) {
        return dot;
      }
      if (spec.kind() == KernelKind::Affine) {
        return 1.0 + dot;
      }
      double base = spec.homogeneous() ? dot : 1.0 + dot;
      double out = 1.0;
      for (int p = 0; p < spec.degree(); ++p) {
        out *= base;
      }
      return out;
    }
    case KernelKind::Gaussian:
    case KernelKind::Laplace: {
      double sq = 0.0;
      for (Eigen::Index k = 0; k < dim; ++k) {
        double diff = z[k] - w[k];
        sq += diff * diff;
      }
      double dist = spec.kind() == KernelKind::Gaussian ? sq : std::sqrt(sq);
      return std::exp(-spec.bandwidth() * dist);
    }
  }
  return 0.0;
}

// Points as contiguous columns.
Eigen::MatrixXd points_as_columns(const CovariateMatrix &X) { return X.transpose(); }

}  // namespace

void validate_covariates(const KernelSpec &spec, const CovariateMatrix &X) {
  require(X.rows() >= 1 && X.cols() >= 1, "covariate matrix must be non-empty");
  require(X.allFinite(), "covariates must be finite");
  if (spec.kind() == KernelKind::Sobolev) {
    require(X.cols() == 1, "sobolev kernel takes scalar inputs");
    require((X.array() >= 0.0).all() && (X.array() <= 1.0).all(),
            "sobolev kernel inputs must lie in [0, 1]");
  }
}

double eval_kernel(const KernelSpec &spec, const Eigen::Ref<const Eigen::VectorXd> &z,
                   const Eigen::Ref<const Eigen::VectorXd> &w) {
  require(z.size() == w.size(), "kernel arguments have different dimensions");
  require(z.size() >= 1, "kernel arguments must be non-empty");
  require(z.allFinite() && w.allFinite(), "kernel arguments must be finite");
  if (spec.kind() == KernelKind::Sobolev) {
    require(z.size() == 1, "sobolev kernel takes scalar inputs");
    require(z[0] >= 0.0 && z[0] <= 1.0 && w[0] >= 0.0 && w[0] <= 1.0,
            "sobolev kernel inputs must lie in [0, 1]");
  }
  return evaluate(spec, z.data(), w.data(), z.size());
}

Eigen::MatrixXd gram_matrix(const KernelSpec &spec, const CovariateMatrix &X,
                            Eigen::Index max_rows) {
  validate_covariates(spec, X);
  require(X.rows() <= max_rows, "gram matrix size " + std::to_string(X.rows()) +
                                    " exceeds configured cap " + std::to_string(max_rows));
  const Eigen::MatrixXd points = points_as_columns(X);
  const Eigen::Index n = X.rows();
  const Eigen::Index dim = X.cols();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double *xj = points.col(j).data();
    for (Eigen::Index i = j; i < n; ++i) {
      double value = evaluate(spec, points.col(i).data(), xj, dim);
      K(i, j) = value;
      K(j, i) = value;
    }
  }
  return K;
}

Eigen::MatrixXd cross_gram(const KernelSpec &spec, const CovariateMatrix &X_train,
                           const CovariateMatrix &X_test) {
  validate_covariates(spec, X_train);
  validate_covariates(spec, X_test);
  require(X_train.cols() == X_test.cols(), "train and test covariates differ in dimension");
  const Eigen::MatrixXd train = points_as_columns(X_train);
  const Eigen::MatrixXd test = points_as_columns(X_test);
  const Eigen::Index dim = X_train.cols();
  Eigen::MatrixXd out(X_test.rows(), X_train.rows());
  for (Eigen::Index i = 0; i < X_train.rows(); ++i) {
    const double *xi = train.col(i).data();
    for (Eigen::Index t = 0; t < X_test.rows(); ++t) {
      out(t, i) = evaluate(spec, test.col(t).data(), xi, dim);
    }
  }
  return out;
}

}  // namespace shiftkrr
