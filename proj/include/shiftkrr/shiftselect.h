#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "shiftkrr/kernels.h"
#include "shiftkrr/krr.h"

// Model selection under covariate shift with pseudo-labels:
//
//   1. split the labeled source data into D1 (candidates) and D2 (imputer),
//   2. fit one KRR candidate per penalty on D1 and an imputation model on D2,
//   3. label the unlabeled target covariates with the imputation model,
//   4. keep the candidate that best fits those pseudo-labels.

namespace shiftkrr {

using Rng = std::mt19937_64;

struct LabeledSet {
  CovariateMatrix x;
  Eigen::VectorXd y;

  Eigen::Index size() const { return x.rows(); }
};

struct UnlabeledSet {
  CovariateMatrix x;

  Eigen::Index size() const { return x.rows(); }
};

/// Penalty -> fitted candidate, ordered by increasing penalty.
using CandidateSet = std::map<double, KrrModel>;

/// Penalty -> prediction vector, ordered by increasing penalty.
using PredictionSet = std::map<double, Eigen::VectorXd>;

struct PipelineConfig {
  double rho = 0.5;
  /// Strictly increasing penalties. Empty means default_lambda_grid(|D1|).
  std::vector<double> lambda_grid;
  /// Imputer penalty. Unset means 1 / (10 |D2|).
  std::optional<double> imputer_lambda;
  std::uint64_t seed = 0;

  void validate() const;
};

/// max_j lambda_{j+1} / lambda_j of a strictly increasing grid (1 for a
/// singleton grid).
double grid_ratio(const std::vector<double> &grid);

/// Throws unless the grid is non-empty, positive, finite and strictly increasing.
void validate_lambda_grid(const std::vector<double> &grid);

struct RiskScan {
  double chosen_lambda = 0.0;
  /// (lambda, mean squared deviation from the target vector), increasing lambda.
  std::vector<std::pair<double, double>> risks;
};

/// Mean squared deviation of every prediction vector from `target` and the
/// smallest penalty attaining the minimum.
RiskScan scan_risks(const PredictionSet &predictions, const Eigen::VectorXd &target);

struct SelectionResult {
  double chosen_lambda = 0.0;
  KrrModel chosen_model;
  std::vector<std::pair<double, double>> pseudo_risk_per_lambda;
  std::optional<KrrModel> imputer;
  Eigen::Index n1 = 0;
  Eigen::Index n2 = 0;

  /// {schema_version, chosen_lambda, n1, n2, risks: [{lambda, pseudo_risk}...]}
  std::string to_json() const;
};

/// Sizes ceil((1 - rho) n) and floor(rho n). The partition is a uniformly
/// random function of the generator state.
std::pair<LabeledSet, LabeledSet> split_data(const LabeledSet &data, double rho, Rng &rng);

/// Split sizes (|D1|, |D2|) for n points.
std::pair<Eigen::Index, Eigen::Index> split_sizes(Eigen::Index n, double rho);

/// {2^k base_scale / (10 n1) : k = 0..K}, K the smallest integer with
/// 2^K >= 10 n1 / base_scale. Consecutive ratios are exactly 2.
std::vector<double> default_lambda_grid(Eigen::Index n1, double base_scale = 1.0);

struct TheoryGrid {
  std::vector<double> lambda_grid;
  double imputer_lambda = 0.0;
};

/// Grid scaled like the excess-risk bounds for bounded kernels:
/// lambda_0 = C M^2 log(n/delta) / ((1 - rho) n), Lambda = {2^k lambda_0 :
/// k = 0..ceil(log2 n)} and imputer penalty C M^2 log(n/delta) / (rho n).
/// C is not known in closed form, so it is a caller-supplied constant.
TheoryGrid theory_lambda_grid(Eigen::Index n, double rho, double delta, double kernel_bound_sq,
                              double constant);

CandidateSet train_candidates(const KernelSpec &spec, const LabeledSet &d1,
                              const std::vector<double> &grid);

KrrModel train_imputer(const KernelSpec &spec, const LabeledSet &d2, double lambda_tilde);

Eigen::VectorXd pseudo_labels(const KrrModel &imputer, const UnlabeledSet &x0);

/// Candidate minimizing (1/n0) sum_i (f_lambda(x0_i) - pseudo_y_i)^2; ties go
/// to the smallest penalty.
SelectionResult select_model(const CandidateSet &candidates, const UnlabeledSet &x0,
                             const Eigen::VectorXd &pseudo_y);

SelectionResult run_pipeline(const KernelSpec &spec, const LabeledSet &data,
                             const UnlabeledSet &x0, const PipelineConfig &cfg);

}  // namespace shiftkrr
