#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "shiftkrr/krr.h"
#include "shiftkrr/shiftselect.h"

/*
 * Monte Carlo study of penalty selection under a designed covariate shift.
 *
 * For each even n the source covariates come from
 *   P = B/(B+1) U[0, 1/2] + 1/(B+1) U[1/2, 1]
 * and the target covariates from the mirrored mixture Q, with B = n^(1/3).
 * Labels are sin(2 pi x) plus Gaussian noise. Candidates are Sobolev-kernel
 * KRR fits on one half of the source data; three strategies pick a penalty:
 *
 *   PseudoLabel  fit to an imputation model's predictions on target covariates
 *   Oracle       fit to the noiseless regression function on target covariates
 *   Naive        hold-out error on the other half of the source data
 *
 * All three see the same data, split and candidates within a run.
 */

namespace shiftkrr::sim {

enum class Method { PseudoLabel, Oracle, Naive };
inline constexpr std::array<Method, 3> kAllMethods = {Method::PseudoLabel, Method::Oracle,
                                                      Method::Naive};

std::string_view method_name(Method method);
Method parse_method(std::string_view name);

enum class Side { Source, Target };

struct SimConfig {
  std::vector<Eigen::Index> n_grid = {500, 1000, 2000, 4000, 8000};
  int runs_per_n = 20;
  /// B = n^shift_exponent.
  double shift_exponent = 1.0 / 3.0;
  double noise_sd = 1.0;
  Eigen::Index eval_points = 1000;
  int bootstrap_reps = 10000;
  std::uint64_t master_seed = 0;

  void validate() const;
  double shift_strength(Eigen::Index n) const;
};

struct TrialRecord {
  Eigen::Index n = 0;
  int run = 0;
  Method method = Method::PseudoLabel;
  std::uint64_t seed = 0;
  double excess_risk = 0.0;
  double chosen_lambda = 0.0;
};

/// Per-method outcome of one run, including the full selection criterion.
struct MethodOutcome {
  double excess_risk = 0.0;
  RiskScan scan;
};

struct RunOutcome {
  std::uint64_t seed = 0;
  std::array<MethodOutcome, 3> methods;  // indexed like kAllMethods

  const MethodOutcome &operator[](Method method) const {
    return methods[static_cast<std::size_t>(method)];
  }
};

struct TrialData {
  LabeledSet source;
  UnlabeledSet target;
};

double true_function(double x);

double sample_mixture(double shift_strength, Side side, Rng &rng);

/// n labeled source points and n/2 unlabeled target points.
TrialData generate_trial_data(Eigen::Index n, const SimConfig &cfg, Rng &rng);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// (1/N) sum_i (f(z_i) - f*(z_i))^2 over N fresh target draws, with its
/// standard error.
MonteCarloEstimate estimate_excess_risk_with_error(const KrrModel &model, double shift_strength,
                                                   Eigen::Index eval_points, Rng &rng);

double estimate_excess_risk(const KrrModel &model, double shift_strength,
                            Eigen::Index eval_points, Rng &rng);

/// Seed of run `run` at sample size n. Independent of the method, so all
/// strategies in a run share data.
std::uint64_t trial_seed(std::uint64_t master_seed, Eigen::Index n, int run);

/// All three strategies on the data generated from `seed`.
RunOutcome run_methods(Eigen::Index n, std::uint64_t seed, const SimConfig &cfg);

TrialRecord run_trial(Eigen::Index n, int run, Method method, const SimConfig &cfg);

/// Every (n, run, method) trial, sorted by (n, run, method). Runs are spread
/// over `threads` workers (0 = hardware concurrency); the result does not
/// depend on the thread count.
std::vector<TrialRecord> run_simulation(const SimConfig &cfg, unsigned threads = 1);

struct SlopeFit {
  double alpha_hat = 0.0;  // negated log-log slope
  double intercept = 0.0;
  std::map<Eigen::Index, double> per_n_means;
  std::vector<double> residuals;
};

SlopeFit fit_loglog_slope(const std::map<Eigen::Index, double> &per_n_means);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct BootstrapResult {
  int reps = 0;
  Interval pl_minus_oracle;
  Interval pl_minus_naive;
  std::array<Interval, 3> alpha;  // per method, indexed like kAllMethods
  /// Replicate fits, [method][rep] -> (alpha_hat, intercept).
  std::array<std::vector<std::pair<double, double>>, 3> replicates;
};

/// Resamples whole runs with replacement, independently for each n and jointly
/// across methods, and refits the three slopes per replicate. Percentile 95%
/// intervals.
BootstrapResult cluster_bootstrap(const std::vector<TrialRecord> &records, int reps, Rng &rng);

struct CurvePoint {
  double mean = 0.0;
  double std_error = 0.0;
};

struct SimulationSummary {
  /// [method] -> n -> mean/stderr of the excess risk over runs.
  std::array<std::map<Eigen::Index, CurvePoint>, 3> curve;
  std::array<SlopeFit, 3> slopes;
};

SimulationSummary summarize(const std::vector<TrialRecord> &records);

/// Seed for the bootstrap stream, derived from the master seed.
std::uint64_t bootstrap_seed(std::uint64_t master_seed);

std::string trials_csv(const std::vector<TrialRecord> &records);
std::string curve_csv(const SimulationSummary &summary);
std::string slopes_json(const SimConfig &cfg, const SimulationSummary &summary,
                        const BootstrapResult &bootstrap);

}  // namespace shiftkrr::sim
