#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "shiftkrr/shiftselect.h"

// Finite-dimensional evaluation of the excess-risk and model-selection bounds
// for KRR under covariate shift. Universal constants that are only known to
// exist are report parameters (default 1) and are never treated as certified.

namespace shiftkrr::theory {

struct BoundInputs {
  Eigen::MatrixXd sigma;   // source second moment
  Eigen::MatrixXd sigma0;  // target second moment
  double noise_sd = 1.0;
  double theta_norm = 1.0;
  Eigen::Index n = 1;
  Eigen::Index n0 = 1;
  double rho = 0.5;
  Eigen::Index m = 2;
  double delta = 0.2;
  // Hypothesis-only annotations; they carry no computational role.
  std::optional<double> kappa;
  std::optional<double> kernel_bound;

  void validate() const;
};

struct SpectrumInputs {
  std::vector<double> mu;  // nonincreasing, nonnegative
  double c0 = 1.0;

  void validate() const;
};

/// S = (Sigma + lambda I)^{-1/2} Sigma0 (Sigma + lambda I)^{-1/2}.
Eigen::MatrixXd shift_operator(const BoundInputs &inputs, double lambda);

/// lambda |S_lambda| |theta|^2 + sigma^2 Tr(S_lambda) log(m/delta) / ((1 - rho) n).
double candidate_bound(const BoundInputs &inputs, double lambda);

/// (lambda~ |theta|^2 + sigma^2 log(m/delta) / (rho n)) (|S_lambda~| + 1).
double overhead_bound(const BoundInputs &inputs, double lambda_tilde);

/// Whether n0 / Tr(Sigma0) >= n / Tr(Sigma), a hypothesis of the sub-Gaussian
/// design bound. Reported only.
bool sample_size_condition(const BoundInputs &inputs);

/// D(r) = min{j >= 1 : mu_j <= r^2}, 1-based. Throws TruncationError when the
/// truncated spectrum never drops to r^2.
Eigen::Index effective_dim(const SpectrumInputs &spectrum, double r);

struct RegularityRow {
  double r = 0.0;
  Eigen::Index dim = 0;
  double tail = 0.0;   // sum_{j > D(r)} mu_j over the truncation (a lower bound)
  double bound = 0.0;  // c0 D(r) r^2
  double ratio = 0.0;  // tail / (D(r) r^2)
  bool passes = false;
};

struct RegularityReport {
  std::vector<RegularityRow> rows;
  double worst_ratio = 0.0;
  bool all_pass = true;
};

RegularityReport regular_spectrum_check(const SpectrumInputs &spectrum,
                                        const std::vector<double> &r_grid);

/// U = max over ordered pairs of <(y_a - y_b)/|y_a - y_b|, pseudo_y - true_y>,
/// with 0/0 = 0.
double selection_overhead_U(const PredictionSet &candidate_preds, const Eigen::VectorXd &pseudo_y,
                            const Eigen::VectorXd &true_y);

struct InequalityReport {
  double chosen_lambda = 0.0;
  double lhs = 0.0;  // |y_chosen - y*|^2
  double rhs = 0.0;  // min over (gamma, lambda) of (1+gamma)|y_lambda - y*|^2 + 4(1+1/gamma) U^2
  double best_gamma = 0.0;
  double overhead = 0.0;
  double slack = 0.0;
  bool holds = false;
};

/// Tolerance below zero still treated as a satisfied inequality.
inline constexpr double kSlackTolerance = 1e-9;

InequalityReport verify_selection_inequality(const PredictionSet &candidate_preds,
                                             const Eigen::VectorXd &pseudo_y,
                                             const Eigen::VectorXd &true_y,
                                             const std::vector<double> &gamma_grid);

struct BiasVarianceInputs {
  std::vector<double> candidate_losses;  // L(g_j)
  double imputer_bias = 0.0;             // L(E g~)
  double variance_proxy = 0.0;           // V
  Eigen::Index m = 1;
  Eigen::Index n = 1;
  double delta = 0.2;
  double constant = 1.0;                 // the universal C
};

/// Random instance for checking the selection inequality: true labels,
/// Gaussian-perturbed candidates and pseudo-labels. Some instances repeat a
/// candidate or use exact pseudo-labels so degenerate cases are exercised.
struct SelectionInstance {
  PredictionSet candidate_preds;
  Eigen::VectorXd pseudo_y;
  Eigen::VectorXd true_y;
};

SelectionInstance random_selection_instance(Rng &rng, int max_m, int max_n);

/// Geometric grid 10^-4 .. 10^4.
std::vector<double> default_gamma_grid();

struct OracleCheckReport {
  int instances = 0;
  int violations = 0;
  double min_slack = 0.0;
};

OracleCheckReport check_oracle_inequality(int instances, int max_m, int max_n,
                                          std::uint64_t seed);

/// min over gamma of (1+gamma) min_j L(g_j) + C (1 + 1/gamma)(bias + V^2 log(m/delta)/n).
double bias_variance_overhead(const BiasVarianceInputs &inputs,
                              const std::vector<double> &gamma_grid);

}  // namespace shiftkrr::theory
