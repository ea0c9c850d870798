#include <gtest/gtest.h>

#include <random>

#include "shiftkrr/errors.h"
#include "shiftkrr/krr.h"
#include "test_support.h"

namespace shiftkrr {

namespace {

CovariateMatrix two_points() {
  CovariateMatrix x(2, 1);
  x << 0.5, 1.0;
  return x;
}

Eigen::VectorXd two_labels() { return Eigen::Vector2d(1.0, 2.0); }

// Cramer's rule on [[0.7, 0.5], [0.5, 1.2]] alpha = [1, 2].
Eigen::Vector2d two_point_alpha() {
  const double a = 0.5 + 2 * 0.1, b = 0.5, d = 1.0 + 2 * 0.1;
  const double det = a * d - b * b;
  return {(1.0 * d - b * 2.0) / det, (a * 2.0 - b * 1.0) / det};
}

double objective(const KrrModel &model, const Eigen::VectorXd &y) {
  const Eigen::MatrixXd K = gram_matrix(model.kernel(), model.train_x());
  const Eigen::VectorXd fitted = K * model.alpha();
  return (fitted - y).squaredNorm() / static_cast<double>(y.size()) +
         model.lambda() * model.alpha().dot(fitted);
}

}  // namespace

TEST(test_krr, test_zero_labels) {
  std::mt19937_64 rng(1);
  const CovariateMatrix x = testing::random_matrix(rng, 12, 3);
  const KrrModel model = fit_krr(KernelSpec::gaussian(1.0), x, Eigen::VectorXd::Zero(12), 0.5);
  EXPECT_EQ(model.alpha(), Eigen::VectorXd::Zero(12));
  EXPECT_EQ(predict(model, testing::random_matrix(rng, 5, 3)), Eigen::VectorXd::Zero(5));
  EXPECT_EQ(rkhs_norm_sq(model), 0.0);
}

TEST(test_krr, test_two_point_sobolev) {
  const KrrModel model = fit_krr(KernelSpec::sobolev(), two_points(), two_labels(), 0.1);
  const Eigen::Vector2d expected = two_point_alpha();
  EXPECT_NEAR(model.alpha()[0], expected[0], 1e-13);
  EXPECT_NEAR(model.alpha()[1], expected[1], 1e-13);

  CovariateMatrix half(1, 1);
  half << 0.5;
  EXPECT_NEAR(predict(model, half)[0], 0.5 * expected[0] + 0.5 * expected[1], 1e-13);

  // Fitted values K alpha with K = [[0.5, 0.5], [0.5, 1]].
  const Eigen::Vector2d fitted(0.5 * expected[0] + 0.5 * expected[1],
                               0.5 * expected[0] + 1.0 * expected[1]);
  EXPECT_NEAR((predict(model, two_points()) - fitted).norm(), 0.0, 1e-13);
  const double mse = ((fitted - two_labels()).squaredNorm()) / 2.0;
  EXPECT_NEAR(empirical_mse(model, two_points(), two_labels()), mse, 1e-13);
}

TEST(test_krr, test_empirical_mse_examples) {
  CovariateMatrix x(2, 1);
  x << 0.2, 0.9;
  const KrrModel zero(KernelSpec::sobolev(), x, Eigen::VectorXd::Zero(2), 1.0);
  EXPECT_EQ(empirical_mse(zero, x, Eigen::Vector2d(1.0, -1.0)), 1.0);
  const KrrModel fit = fit_krr(KernelSpec::sobolev(), two_points(), two_labels(), 0.3);
  EXPECT_EQ(empirical_mse(fit, two_points(), predict(fit, two_points())), 0.0);
  EXPECT_THROW(empirical_mse(fit, two_points(), Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST(test_krr, test_fit_errors) {
  EXPECT_THROW(fit_krr(KernelSpec::sobolev(), two_points(), two_labels(), 0.0), InvalidArgument);
  EXPECT_THROW(fit_krr(KernelSpec::sobolev(), two_points(), two_labels(), -1.0), InvalidArgument);
  EXPECT_THROW(fit_krr(KernelSpec::sobolev(), two_points(), Eigen::VectorXd::Ones(3), 0.1),
               InvalidArgument);
  EXPECT_THROW(fit_krr(KernelSpec::sobolev(), two_points(), Eigen::Vector2d(1.0, NAN), 0.1),
               InvalidArgument);
  const KrrModel model = fit_krr(KernelSpec::linear(), Eigen::MatrixXd::Identity(2, 2),
                                 two_labels(), 0.1);
  EXPECT_THROW(predict(model, Eigen::MatrixXd::Zero(1, 3)), InvalidArgument);
}

TEST(test_krr, test_linear_kernel_matches_primal_ridge) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick_n(1, 100);
  std::uniform_int_distribution<int> pick_d(1, 10);
  std::uniform_real_distribution<double> pick_log_lambda(-4.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = pick_n(rng);
    const int d = pick_d(rng);
    const double lambda = std::pow(10.0, pick_log_lambda(rng));
    const Eigen::MatrixXd x = testing::random_matrix(rng, n, d);
    const Eigen::VectorXd y = testing::random_vector(rng, n);
    const Eigen::MatrixXd x_new = testing::random_matrix(rng, 7, d);

    const KrrModel model = fit_krr(KernelSpec::linear(), x, y, lambda);
    const Eigen::VectorXd theta = testing::primal_ridge(x, y, lambda);
    const Eigen::VectorXd expected = x_new * theta;
    const Eigen::VectorXd got = predict(model, x_new);
    EXPECT_LE((got - expected).norm(), 1e-8 * expected.norm())
        << "n=" << n << " d=" << d << " lambda=" << lambda;
    EXPECT_NEAR(rkhs_norm_sq(model), theta.squaredNorm(), 1e-8 * theta.squaredNorm() + 1e-14);
  }
}

TEST(test_krr, test_normal_equation_residual) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick_n(1, 200);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> pick_log_lambda(-5.0, 2.0);
  const std::vector<KernelSpec> kernels = {KernelSpec::sobolev(), KernelSpec::gaussian(3.0),
                                           KernelSpec::laplace(1.0),
                                           KernelSpec::polynomial(2, false)};
  for (int trial = 0; trial < 60; ++trial) {
    const auto &spec = kernels[static_cast<std::size_t>(trial) % kernels.size()];
    const int n = pick_n(rng);
    CovariateMatrix x(n, 1);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = unit(rng);
    }
    const Eigen::VectorXd y = testing::random_vector(rng, n);
    const KrrModel model = fit_krr(spec, x, y, std::pow(10.0, pick_log_lambda(rng)));
    EXPECT_LE(normal_equation_residual(model, y), kNormalEquationTolerance);
  }
}

TEST(test_krr, test_shrinkage_monotone_in_lambda) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto &spec : {KernelSpec::sobolev(), KernelSpec::gaussian(10.0)}) {
    const int n = 40;
    CovariateMatrix x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = unit(rng);
      y[i] = std::sin(6.0 * x(i, 0)) + 0.3 * testing::random_vector(rng, 1)[0];
    }
    double previous_norm = std::numeric_limits<double>::infinity();
    double previous_objective = -1.0;
    for (int k = 0; k < 10; ++k) {
      const double lambda = 1e-4 * std::pow(3.0, k);
      const KrrModel model = fit_krr(spec, x, y, lambda);
      const double norm = rkhs_norm_sq(model);
      const double value = objective(model, y);
      EXPECT_LE(norm, previous_norm * (1 + 1e-12)) << spec.to_string() << " k=" << k;
      EXPECT_GE(value, previous_objective * (1 - 1e-12)) << spec.to_string() << " k=" << k;
      previous_norm = norm;
      previous_objective = value;
    }
  }
}

TEST(test_krr, test_huge_lambda_limit) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CovariateMatrix x(30, 1);
  for (int i = 0; i < 30; ++i) {
    x(i, 0) = unit(rng);
  }
  const Eigen::VectorXd y = testing::random_vector(rng, 30);
  const KrrModel model = fit_krr(KernelSpec::sobolev(), x, y, 1e12);
  EXPECT_LE(model.alpha().cwiseAbs().maxCoeff(), 1e-6 * y.cwiseAbs().maxCoeff());
}

TEST(test_krr, test_json_record) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = testing::random_matrix(rng, 6, 2);
  const KrrModel model =
      fit_krr(KernelSpec::laplace(0.7), x, testing::random_vector(rng, 6), 0.013);
  const KrrModel back = KrrModel::from_json(model.to_json());
  EXPECT_EQ(back.kernel(), model.kernel());
  EXPECT_EQ(back.lambda(), model.lambda());
  EXPECT_EQ(back.train_x(), model.train_x());
  EXPECT_EQ(back.alpha(), model.alpha());
  EXPECT_NE(model.to_json().find("\"schema\":\"shiftkrr.krr_model/1\""), std::string::npos);

  EXPECT_THROW(KrrModel::from_json("{\"schema\":\"other/1\"}"), InvalidArgument);
  EXPECT_THROW(KrrModel::from_json("not json"), InvalidArgument);
}

}  // namespace shiftkrr
