#include "shiftkrr/theory.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "shiftkrr/errors.h"

namespace shiftkrr::theory {

namespace {

void check_moment_matrix(const Eigen::MatrixXd &m, const char *name) {
  const std::string label(name);
  require(m.rows() >= 1 && m.rows() == m.cols(), label + " must be a non-empty square matrix");
  require(m.allFinite(), label + " must be finite");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          label + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() >= -1e-10 * scale, label + " must be positive semidefinite");
}

double largest_eigenvalue(const Eigen::MatrixXd &symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

double log_m_over_delta(const BoundInputs &in) {
  return std::log(static_cast<double>(in.m) / in.delta);
}

}  // namespace

void BoundInputs::validate() const {
  check_moment_matrix(sigma, "Sigma");
  check_moment_matrix(sigma0, "Sigma0");
  require(sigma.rows() == sigma0.rows(), "Sigma and Sigma0 dimensions differ");
  require(std::isfinite(noise_sd) && noise_sd >= 0.0, "noise scale must be nonnegative");
  require(std::isfinite(theta_norm) && theta_norm >= 0.0, "theta norm must be nonnegative");
  require(n >= 1 && n0 >= 1, "sample sizes must be positive");
  require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
  require(m >= 1, "grid size must be positive");
  require(delta > 0.0 && delta <= 0.2, "delta must lie in (0, 1/5]");
}

void SpectrumInputs::validate() const {
  require(!mu.empty(), "spectrum is empty");
  require(std::isfinite(c0) && c0 >= 0.0, "regularity constant must be nonnegative");
  for (std::size_t j = 0; j < mu.size(); ++j) {
    require(std::isfinite(mu[j]) && mu[j] >= 0.0, "eigenvalues must be nonnegative");
    if (j > 0) {
      require(mu[j] <= mu[j - 1], "eigenvalues must be sorted in nonincreasing order");
    }
  }
}

Eigen::MatrixXd shift_operator(const BoundInputs &inputs, double lambda) {
  require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
  inputs.validate();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inputs.sigma);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition of Sigma failed");
  }
  const Eigen::VectorXd scale =
      (eig.eigenvalues().cwiseMax(0.0).array() + lambda).rsqrt().matrix();
  const Eigen::MatrixXd inv_sqrt =
      eig.eigenvectors() * scale.asDiagonal() * eig.eigenvectors().transpose();
  Eigen::MatrixXd s = inv_sqrt * inputs.sigma0 * inv_sqrt;
  return 0.5 * (s + s.transpose());
}

double candidate_bound(const BoundInputs &inputs, double lambda) {
  const Eigen::MatrixXd s = shift_operator(inputs, lambda);
  const double bias = lambda * largest_eigenvalue(s) * inputs.theta_norm * inputs.theta_norm;
  const double variance = inputs.noise_sd * inputs.noise_sd * s.trace() *
                          log_m_over_delta(inputs) /
                          ((1.0 - inputs.rho) * static_cast<double>(inputs.n));
  return bias + variance;
}

double overhead_bound(const BoundInputs &inputs, double lambda_tilde) {
  const Eigen::MatrixXd s = shift_operator(inputs, lambda_tilde);
  const double first = lambda_tilde * inputs.theta_norm * inputs.theta_norm +
                       inputs.noise_sd * inputs.noise_sd * log_m_over_delta(inputs) /
                           (inputs.rho * static_cast<double>(inputs.n));
  return first * (largest_eigenvalue(s) + 1.0);
}

bool sample_size_condition(const BoundInputs &inputs) {
  inputs.validate();
  return static_cast<double>(inputs.n0) * inputs.sigma.trace() >=
         static_cast<double>(inputs.n) * inputs.sigma0.trace();
}

Eigen::Index effective_dim(const SpectrumInputs &spectrum, double r) {
  require(std::isfinite(r) && r > 0.0, "threshold r must be positive");
  spectrum.validate();
  const double threshold = r * r;
  for (std::size_t j = 0; j < spectrum.mu.size(); ++j) {
    if (spectrum.mu[j] <= threshold) {
      return static_cast<Eigen::Index>(j) + 1;
    }
  }
  throw TruncationError("effective dimension undefined: all " +
                        std::to_string(spectrum.mu.size()) +
                        " eigenvalues exceed r^2 = " + std::to_string(threshold));
}

RegularityReport regular_spectrum_check(const SpectrumInputs &spectrum,
                                        const std::vector<double> &r_grid) {
  require(!r_grid.empty(), "threshold grid is empty");
  RegularityReport report;
  for (double r : r_grid) {
    RegularityRow row;
    row.r = r;
    row.dim = effective_dim(spectrum, r);
    for (std::size_t j = static_cast<std::size_t>(row.dim); j < spectrum.mu.size(); ++j) {
      row.tail += spectrum.mu[j];
    }
    const double scale = static_cast<double>(row.dim) * r * r;
    row.bound = spectrum.c0 * scale;
    row.ratio = row.tail / scale;
    row.passes = row.tail <= row.bound;
    report.worst_ratio = std::max(report.worst_ratio, row.ratio);
    report.all_pass = report.all_pass && row.passes;
    report.rows.push_back(row);
  }
  return report;
}

double selection_overhead_U(const PredictionSet &candidate_preds, const Eigen::VectorXd &pseudo_y,
                            const Eigen::VectorXd &true_y) {
  require(!candidate_preds.empty(), "at least one candidate is required");
  require(pseudo_y.size() == true_y.size(), "pseudo and true label lengths differ");
  const Eigen::VectorXd error = pseudo_y - true_y;
  double best = 0.0;  // the (lambda, lambda) pair contributes 0
  for (const auto &[la, ya] : candidate_preds) {
    require(ya.size() == error.size(), "candidate prediction length differs from labels");
    for (const auto &[lb, yb] : candidate_preds) {
      if (la == lb) {
        continue;
      }
      const Eigen::VectorXd diff = ya - yb;
      const double norm = diff.norm();
      if (norm == 0.0) {
        continue;
      }
      best = std::max(best, diff.dot(error) / norm);
    }
  }
  return best;
}

InequalityReport verify_selection_inequality(const PredictionSet &candidate_preds,
                                             const Eigen::VectorXd &pseudo_y,
                                             const Eigen::VectorXd &true_y,
                                             const std::vector<double> &gamma_grid) {
  require(!gamma_grid.empty(), "gamma grid is empty");
  for (double gamma : gamma_grid) {
    require(std::isfinite(gamma) && gamma > 0.0, "gamma values must be positive");
  }
  InequalityReport report;
  report.overhead = selection_overhead_U(candidate_preds, pseudo_y, true_y);
  report.chosen_lambda = scan_risks(candidate_preds, pseudo_y).chosen_lambda;
  report.lhs = (candidate_preds.at(report.chosen_lambda) - true_y).squaredNorm();

  double best_loss = std::numeric_limits<double>::infinity();
  for (const auto &[lambda, pred] : candidate_preds) {
    best_loss = std::min(best_loss, (pred - true_y).squaredNorm());
  }
  const double u_sq = report.overhead * report.overhead;
  report.rhs = std::numeric_limits<double>::infinity();
  for (double gamma : gamma_grid) {
    const double value = (1.0 + gamma) * best_loss + 4.0 * (1.0 + 1.0 / gamma) * u_sq;
    if (value < report.rhs) {
      report.rhs = value;
      report.best_gamma = gamma;
    }
  }
  report.slack = report.rhs - report.lhs;
  report.holds = report.slack >= -kSlackTolerance;
  return report;
}

double bias_variance_overhead(const BiasVarianceInputs &inputs,
                              const std::vector<double> &gamma_grid) {
  require(!inputs.candidate_losses.empty(), "candidate losses are empty");
  for (double loss : inputs.candidate_losses) {
    require(std::isfinite(loss) && loss >= 0.0, "candidate losses must be nonnegative");
  }
  require(inputs.imputer_bias >= 0.0 && inputs.variance_proxy >= 0.0 && inputs.constant >= 0.0,
          "bias, variance proxy and constant must be nonnegative");
  require(inputs.m >= 1 && inputs.n >= 1, "m and n must be positive");
  require(inputs.delta > 0.0 && inputs.delta <= 1.0, "delta must lie in (0, 1]");
  require(!gamma_grid.empty(), "gamma grid is empty");

  const double min_loss =
      *std::min_element(inputs.candidate_losses.begin(), inputs.candidate_losses.end());
  const double pseudo_error =
      inputs.imputer_bias + inputs.variance_proxy * inputs.variance_proxy *
                                std::log(static_cast<double>(inputs.m) / inputs.delta) /
                                static_cast<double>(inputs.n);
  double best = std::numeric_limits<double>::infinity();
  for (double gamma : gamma_grid) {
    require(std::isfinite(gamma) && gamma > 0.0, "gamma values must be positive");
    best = std::min(best, (1.0 + gamma) * min_loss +
                              inputs.constant * (1.0 + 1.0 / gamma) * pseudo_error);
  }
  return best;
}


SelectionInstance random_selection_instance(Rng &rng, int max_m, int max_n) {
  require(max_m >= 1 && max_n >= 1, "instance bounds must be positive");
  std::uniform_int_distribution<int> pick_m(1, max_m);
  std::uniform_int_distribution<int> pick_n(1, max_n);
  std::uniform_real_distribution<double> pick_scale(0.0, 2.0);
  std::uniform_int_distribution<int> pick_case(0, 9);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int m = pick_m(rng);
  const int n = pick_n(rng);
  auto noise = [&](double scale) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
      v[i] = scale * gauss(rng);
    }
    return v;
  };

  SelectionInstance inst;
  inst.true_y = noise(1.0);
  const int special = pick_case(rng);
  for (int j = 0; j < m; ++j) {
    const double lambda = std::ldexp(1.0, j);
    if (special == 0 && j > 0) {
      // Repeated candidate: exercises the 0/0 = 0 convention.
      inst.candidate_preds.emplace(lambda, inst.candidate_preds.begin()->second);
    } else {
      inst.candidate_preds.emplace(lambda, inst.true_y + noise(pick_scale(rng)));
    }
  }
  inst.pseudo_y = special == 1 ? inst.true_y : Eigen::VectorXd(inst.true_y + noise(pick_scale(rng)));
  return inst;
}

std::vector<double> default_gamma_grid() {
  std::vector<double> grid;
  for (int k = -16; k <= 16; ++k) {
    grid.push_back(std::pow(10.0, k / 4.0));
  }
  return grid;
}

OracleCheckReport check_oracle_inequality(int instances, int max_m, int max_n,
                                          std::uint64_t seed) {
  require(instances >= 1, "instance count must be positive");
  Rng rng(seed);
  const std::vector<double> gammas = default_gamma_grid();
  OracleCheckReport report;
  report.instances = instances;
  report.min_slack = std::numeric_limits<double>::infinity();
  for (int i = 0; i < instances; ++i) {
    const SelectionInstance inst = random_selection_instance(rng, max_m, max_n);
    const InequalityReport r =
        verify_selection_inequality(inst.candidate_preds, inst.pseudo_y, inst.true_y, gammas);
    report.min_slack = std::min(report.min_slack, r.slack);
    if (!r.holds) {
      ++report.violations;
    }
  }
  return report;
}

}  // namespace shiftkrr::theory
