#include "shiftkrr/krr.h"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <utility>

#include "shiftkrr/errors.h"

namespace shiftkrr {

namespace {

constexpr const char *kModelSchema = "shiftkrr.krr_model/1";

double relative_residual(const Eigen::MatrixXd &gram, double shift, const Eigen::VectorXd &alpha,
                         const Eigen::VectorXd &y) {
  Eigen::VectorXd r = gram * alpha + shift * alpha - y;
  return r.norm() / std::max(y.norm(), 1.0);
}

}  // namespace

KrrModel::KrrModel(KernelSpec kernel, CovariateMatrix train_x, Eigen::VectorXd alpha,
                   double lambda)
    : kernel_(std::move(kernel)),
      train_x_(std::move(train_x)),
      alpha_(std::move(alpha)),
      lambda_(lambda) {
  require(std::isfinite(lambda_) && lambda_ > 0.0, "penalty lambda must be positive");
  validate_covariates(kernel_, train_x_);
  require(alpha_.size() == train_x_.rows(), "alpha length must match training size");
  require(alpha_.allFinite(), "alpha must be finite");
}

std::string KrrModel::to_json() const {
  nlohmann::json j;
  j["schema"] = kModelSchema;
  j["kernel"] = kernel_.to_string();
  j["lambda"] = lambda_;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < train_x_.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < train_x_.cols(); ++k) {
      row.push_back(train_x_(i, k));
    }
    rows.push_back(std::move(row));
  }
  j["train_x"] = std::move(rows);
  j["alpha"] = std::vector<double>(alpha_.data(), alpha_.data() + alpha_.size());
  return j.dump();
}

KrrModel KrrModel::from_json(const std::string &text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw InvalidArgument(std::string("malformed model record: ") + e.what());
  }
  require(j.is_object() && j.value("schema", "") == kModelSchema,
          "model record has unknown schema tag");
  try {
    auto kernel = KernelSpec::parse(j.at("kernel").get<std::string>());
    auto rows = j.at("train_x");
    require(rows.is_array() && !rows.empty(), "model record has no training points");
    const auto dim = static_cast<Eigen::Index>(rows.front().size());
    CovariateMatrix x(static_cast<Eigen::Index>(rows.size()), dim);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto &row = rows[static_cast<std::size_t>(i)];
      require(static_cast<Eigen::Index>(row.size()) == dim, "ragged training points");
      for (Eigen::Index k = 0; k < dim; ++k) {
        x(i, k) = row[static_cast<std::size_t>(k)].get<double>();
      }
    }
    auto alpha_values = j.at("alpha").get<std::vector<double>>();
    Eigen::VectorXd alpha =
        Eigen::Map<Eigen::VectorXd>(alpha_values.data(), static_cast<Eigen::Index>(alpha_values.size()));
    return KrrModel(kernel, std::move(x), std::move(alpha), j.at("lambda").get<double>());
  } catch (const nlohmann::json::exception &e) {
    throw InvalidArgument(std::string("malformed model record: ") + e.what());
  }
}

KrrModel fit_krr(const KernelSpec &spec, const CovariateMatrix &X, const Eigen::VectorXd &y,
                 double lambda) {
  return fit_krr_with_gram(spec, X, gram_matrix(spec, X), y, lambda);
}

KrrModel fit_krr_with_gram(const KernelSpec &spec, const CovariateMatrix &X,
                           const Eigen::MatrixXd &gram, const Eigen::VectorXd &y, double lambda) {
  require(std::isfinite(lambda) && lambda > 0.0, "penalty lambda must be positive");
  validate_covariates(spec, X);
  require(y.size() == X.rows(), "label count must match number of covariate rows");
  require(y.allFinite(), "labels must be finite");
  require(gram.rows() == X.rows() && gram.cols() == X.rows(), "gram matrix has wrong shape");

  const double shift = static_cast<double>(X.rows()) * lambda;
  Eigen::MatrixXd system = gram;
  system.diagonal().array() += shift;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization of K + n*lambda*I failed (lambda = " +
                         std::to_string(lambda) + ")");
  }
  Eigen::VectorXd alpha = llt.solve(y);
  if (relative_residual(gram, shift, alpha, y) > kNormalEquationTolerance) {
    // One round of iterative refinement before giving up.
    Eigen::VectorXd r = y - (gram * alpha + shift * alpha);
    alpha += llt.solve(r);
    if (relative_residual(gram, shift, alpha, y) > kNormalEquationTolerance) {
      throw NumericalError("dual system residual above tolerance (lambda = " +
                           std::to_string(lambda) + ")");
    }
  }
  return KrrModel(spec, X, std::move(alpha), lambda);
}

Eigen::VectorXd predict(const KrrModel &model, const CovariateMatrix &X_new) {
  require(X_new.cols() == model.train_x().cols(),
          "prediction points differ in dimension from training points");
  return cross_gram(model.kernel(), model.train_x(), X_new) * model.alpha();
}

double rkhs_norm_sq(const KrrModel &model) {
  const Eigen::MatrixXd K = gram_matrix(model.kernel(), model.train_x(), model.size());
  double value = model.alpha().dot(K * model.alpha());
  if (value < 0.0 && value >= -1e-10) {
    return 0.0;
  }
  return value;
}

double empirical_mse(const KrrModel &model, const CovariateMatrix &X, const Eigen::VectorXd &y) {
  require(y.size() == X.rows(), "label count must match number of covariate rows");
  return (predict(model, X) - y).squaredNorm() / static_cast<double>(y.size());
}

double normal_equation_residual(const KrrModel &model, const Eigen::VectorXd &y) {
  require(y.size() == model.size(), "label count must match training size");
  const Eigen::MatrixXd K = gram_matrix(model.kernel(), model.train_x(), model.size());
  return relative_residual(K, static_cast<double>(model.size()) * model.lambda(), model.alpha(), y);
}

}  // namespace shiftkrr
