#include "shiftkrr/simlab.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <json.hpp>
#include <mutex>
#include <numbers>
#include <thread>

#include "shiftkrr/errors.h"
#include "shiftkrr/textio.h"

namespace shiftkrr::sim {

namespace {

constexpr const char *kTrialsSchema = "shiftkrr.trials/1";
constexpr const char *kCurveSchema = "shiftkrr.curve/1";
constexpr const char *kSlopesSchema = "shiftkrr.slopes/1";
constexpr std::size_t kReplicatesEmitted = 100;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

std::size_t index_of(Method method) { return static_cast<std::size_t>(method); }

Eigen::VectorXd true_values(const CovariateMatrix &x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out[i] = true_function(x(i, 0));
  }
  return out;
}

// Predictions of every candidate at `points`, sharing one cross-Gram matrix.
PredictionSet candidate_predictions(const CandidateSet &candidates, const CovariateMatrix &train_x,
                                    const CovariateMatrix &points) {
  const Eigen::MatrixXd cross = cross_gram(KernelSpec::sobolev(), train_x, points);
  PredictionSet out;
  for (const auto &[lambda, model] : candidates) {
    out.emplace(lambda, cross * model.alpha());
  }
  return out;
}

// Type-7 (linear interpolation) sample quantile of sorted data.
double quantile_sorted(const std::vector<double> &sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval percentile_interval(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return {quantile_sorted(values, 0.025), quantile_sorted(values, 0.975)};
}

// records grouped as [n] -> [run] -> risk per method.
using RunTable = std::map<Eigen::Index, std::vector<std::array<double, 3>>>;

RunTable tabulate(const std::vector<TrialRecord> &records) {
  std::map<Eigen::Index, std::map<int, std::array<double, 3>>> by_run;
  std::map<Eigen::Index, std::map<int, std::array<bool, 3>>> seen;
  for (const auto &rec : records) {
    by_run[rec.n][rec.run][index_of(rec.method)] = rec.excess_risk;
    auto &flags = seen[rec.n][rec.run];
    require(!flags[index_of(rec.method)], "duplicate record for n=" + std::to_string(rec.n) +
                                              " run=" + std::to_string(rec.run));
    flags[index_of(rec.method)] = true;
  }
  RunTable table;
  for (const auto &[n, runs] : by_run) {
    for (const auto &[run, risks] : runs) {
      const auto &flags = seen[n][run];
      require(flags[0] && flags[1] && flags[2],
              "run " + std::to_string(run) + " at n=" + std::to_string(n) +
                  " is missing a method");
      table[n].push_back(risks);
    }
  }
  return table;
}

std::string csv_line(std::initializer_list<std::string> fields) {
  std::string out;
  bool first = true;
  for (const auto &f : fields) {
    if (!first) {
      out += ',';
    }
    out += f;
    first = false;
  }
  out += '\n';
  return out;
}

}  // namespace

std::string_view method_name(Method method) {
  switch (method) {
    case Method::PseudoLabel:
      return "pseudo_label";
    case Method::Oracle:
      return "oracle";
    case Method::Naive:
      return "naive";
  }
  return "";
}

Method parse_method(std::string_view name) {
  for (Method method : kAllMethods) {
    if (method_name(method) == name) {
      return method;
    }
  }
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

void SimConfig::validate() const {
  require(!n_grid.empty(), "n grid is empty");
  for (Eigen::Index n : n_grid) {
    require(n >= 2 && n % 2 == 0, "every n must be even and >= 2");
  }
  require(runs_per_n >= 1, "runs per n must be positive");
  require(std::isfinite(shift_exponent) && shift_exponent >= 0.0,
          "shift exponent must be nonnegative");
  require(std::isfinite(noise_sd) && noise_sd >= 0.0, "noise sd must be nonnegative");
  require(eval_points >= 1, "evaluation points must be positive");
  require(bootstrap_reps >= 1, "bootstrap replicates must be positive");
}

double SimConfig::shift_strength(Eigen::Index n) const {
  return std::pow(static_cast<double>(n), shift_exponent);
}

double true_function(double x) {
  require(std::isfinite(x) && x >= 0.0 && x <= 1.0, "true function is defined on [0, 1]");
  return std::sin(2.0 * std::numbers::pi * x);
}

double sample_mixture(double shift_strength, Side side, Rng &rng) {
  require(std::isfinite(shift_strength) && shift_strength >= 1.0, "B must be >= 1");
  const double heavy = shift_strength / (shift_strength + 1.0);
  const double p_low = side == Side::Source ? heavy : 1.0 - heavy;
  std::bernoulli_distribution pick_low(p_low);
  if (pick_low(rng)) {
    return std::uniform_real_distribution<double>(0.0, 0.5)(rng);
  }
  return std::uniform_real_distribution<double>(0.5, 1.0)(rng);
}

TrialData generate_trial_data(Eigen::Index n, const SimConfig &cfg, Rng &rng) {
  require(n >= 2 && n % 2 == 0, "n must be even and >= 2");
  const double B = cfg.shift_strength(n);
  std::normal_distribution<double> noise(0.0, 1.0);
  TrialData data{LabeledSet{CovariateMatrix(n, 1), Eigen::VectorXd(n)},
                 UnlabeledSet{CovariateMatrix(n / 2, 1)}};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = sample_mixture(B, Side::Source, rng);
    data.source.x(i, 0) = x;
    data.source.y[i] = true_function(x) + cfg.noise_sd * noise(rng);
  }
  for (Eigen::Index i = 0; i < n / 2; ++i) {
    data.target.x(i, 0) = sample_mixture(B, Side::Target, rng);
  }
  return data;
}

MonteCarloEstimate estimate_excess_risk_with_error(const KrrModel &model, double shift_strength,
                                                   Eigen::Index eval_points, Rng &rng) {
  require(eval_points >= 1, "evaluation points must be positive");
  CovariateMatrix z(eval_points, 1);
  for (Eigen::Index i = 0; i < eval_points; ++i) {
    z(i, 0) = sample_mixture(shift_strength, Side::Target, rng);
  }
  const Eigen::ArrayXd sq = (predict(model, z) - true_values(z)).array().square();
  const double N = static_cast<double>(eval_points);
  MonteCarloEstimate out;
  out.mean = sq.mean();
  if (eval_points > 1) {
    out.std_error = std::sqrt((sq - out.mean).square().sum() / (N - 1.0) / N);
  }
  return out;
}

double estimate_excess_risk(const KrrModel &model, double shift_strength, Eigen::Index eval_points,
                            Rng &rng) {
  return estimate_excess_risk_with_error(model, shift_strength, eval_points, rng).mean;
}

std::uint64_t trial_seed(std::uint64_t master_seed, Eigen::Index n, int run) {
  return mix(mix(master_seed, static_cast<std::uint64_t>(n)), static_cast<std::uint64_t>(run));
}

std::uint64_t bootstrap_seed(std::uint64_t master_seed) {
  return mix(master_seed, 0xb0075724ULL);
}

RunOutcome run_methods(Eigen::Index n, std::uint64_t seed, const SimConfig &cfg) {
  cfg.validate();
  Rng rng(seed);
  const TrialData data = generate_trial_data(n, cfg, rng);
  const auto [d1, d2] = split_data(data.source, 0.5, rng);
  require(data.target.size() == d2.size(), "target sample must match the hold-out size");

  const KernelSpec spec = KernelSpec::sobolev();
  const CandidateSet candidates = train_candidates(spec, d1, default_lambda_grid(d1.size()));
  const KrrModel imputer =
      train_imputer(spec, d2, 1.0 / (10.0 * static_cast<double>(d2.size())));

  const PredictionSet on_target = candidate_predictions(candidates, d1.x, data.target.x);
  const PredictionSet on_holdout = candidate_predictions(candidates, d1.x, d2.x);

  RunOutcome outcome;
  outcome.seed = seed;
  outcome.methods[index_of(Method::PseudoLabel)].scan =
      scan_risks(on_target, pseudo_labels(imputer, data.target));
  outcome.methods[index_of(Method::Oracle)].scan =
      scan_risks(on_target, true_values(data.target.x));
  outcome.methods[index_of(Method::Naive)].scan = scan_risks(on_holdout, d2.y);

  // Every method is scored on the same fresh target draws.
  const double B = cfg.shift_strength(n);
  for (auto &method : outcome.methods) {
    Rng eval_rng = rng;
    method.excess_risk = estimate_excess_risk(candidates.at(method.scan.chosen_lambda), B,
                                              cfg.eval_points, eval_rng);
  }
  return outcome;
}

TrialRecord run_trial(Eigen::Index n, int run, Method method, const SimConfig &cfg) {
  const std::uint64_t seed = trial_seed(cfg.master_seed, n, run);
  const RunOutcome outcome = run_methods(n, seed, cfg);
  const MethodOutcome &m = outcome[method];
  return {n, run, method, seed, m.excess_risk, m.scan.chosen_lambda};
}

std::vector<TrialRecord> run_simulation(const SimConfig &cfg, unsigned threads) {
  cfg.validate();
  std::vector<Eigen::Index> grid = cfg.n_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  struct Job {
    Eigen::Index n;
    int run;
  };
  std::vector<Job> jobs;
  for (Eigen::Index n : grid) {
    for (int run = 0; run < cfg.runs_per_n; ++run) {
      jobs.push_back({n, run});
    }
  }
  // Largest problems first keeps workers busy until the end.
  std::vector<std::size_t> schedule(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    schedule[i] = jobs.size() - 1 - i;
  }

  std::vector<std::array<TrialRecord, 3>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= schedule.size()) {
        return;
      }
      const Job job = jobs[schedule[slot]];
      try {
        const std::uint64_t seed = trial_seed(cfg.master_seed, job.n, job.run);
        const RunOutcome outcome = run_methods(job.n, seed, cfg);
        for (Method method : kAllMethods) {
          const MethodOutcome &m = outcome[method];
          results[schedule[slot]][index_of(method)] =
              TrialRecord{job.n, job.run, method, seed, m.excess_risk, m.scan.chosen_lambda};
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
        next.store(schedule.size());
      }
    }
  };

  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }

  std::vector<TrialRecord> records;
  records.reserve(jobs.size() * 3);
  for (const auto &triple : results) {
    records.insert(records.end(), triple.begin(), triple.end());
  }
  return records;
}

SlopeFit fit_loglog_slope(const std::map<Eigen::Index, double> &per_n_means) {
  require(per_n_means.size() >= 2, "slope fit needs at least two sample sizes");
  const auto count = static_cast<Eigen::Index>(per_n_means.size());
  Eigen::VectorXd log_n(count);
  Eigen::VectorXd log_mean(count);
  Eigen::Index i = 0;
  for (const auto &[n, mean] : per_n_means) {
    require(n >= 1, "sample sizes must be positive");
    require(std::isfinite(mean) && mean > 0.0, "mean risks must be positive to take logs");
    log_n[i] = std::log(static_cast<double>(n));
    log_mean[i] = std::log(mean);
    ++i;
  }
  const double x_bar = log_n.mean();
  const double y_bar = log_mean.mean();
  const Eigen::VectorXd dx = log_n.array() - x_bar;
  const double slope = dx.dot(log_mean.array().matrix() - Eigen::VectorXd::Constant(count, y_bar)) /
                       dx.squaredNorm();
  SlopeFit fit;
  fit.alpha_hat = -slope;
  fit.intercept = y_bar - slope * x_bar;
  fit.per_n_means = per_n_means;
  for (Eigen::Index k = 0; k < count; ++k) {
    fit.residuals.push_back(log_mean[k] - (fit.intercept + slope * log_n[k]));
  }
  return fit;
}

BootstrapResult cluster_bootstrap(const std::vector<TrialRecord> &records, int reps, Rng &rng) {
  require(reps >= 1, "bootstrap replicates must be positive");
  const RunTable table = tabulate(records);
  require(table.size() >= 2, "bootstrap needs at least two sample sizes");

  BootstrapResult out;
  out.reps = reps;
  std::vector<double> diff_oracle;
  std::vector<double> diff_naive;
  std::array<std::vector<double>, 3> alphas;
  for (int rep = 0; rep < reps; ++rep) {
    std::array<std::map<Eigen::Index, double>, 3> means;
    for (const auto &[n, runs] : table) {
      std::uniform_int_distribution<std::size_t> pick(0, runs.size() - 1);
      std::array<double, 3> sums{};
      for (std::size_t draw = 0; draw < runs.size(); ++draw) {
        const auto &risks = runs[pick(rng)];
        for (std::size_t m = 0; m < 3; ++m) {
          sums[m] += risks[m];
        }
      }
      for (std::size_t m = 0; m < 3; ++m) {
        means[m][n] = sums[m] / static_cast<double>(runs.size());
      }
    }
    std::array<double, 3> alpha{};
    for (std::size_t m = 0; m < 3; ++m) {
      const SlopeFit fit = fit_loglog_slope(means[m]);
      alpha[m] = fit.alpha_hat;
      alphas[m].push_back(fit.alpha_hat);
      out.replicates[m].emplace_back(fit.alpha_hat, fit.intercept);
    }
    diff_oracle.push_back(alpha[index_of(Method::PseudoLabel)] - alpha[index_of(Method::Oracle)]);
    diff_naive.push_back(alpha[index_of(Method::PseudoLabel)] - alpha[index_of(Method::Naive)]);
  }
  out.pl_minus_oracle = percentile_interval(std::move(diff_oracle));
  out.pl_minus_naive = percentile_interval(std::move(diff_naive));
  for (std::size_t m = 0; m < 3; ++m) {
    out.alpha[m] = percentile_interval(std::move(alphas[m]));
  }
  return out;
}

SimulationSummary summarize(const std::vector<TrialRecord> &records) {
  const RunTable table = tabulate(records);
  SimulationSummary summary;
  for (const auto &[n, runs] : table) {
    const double count = static_cast<double>(runs.size());
    for (std::size_t m = 0; m < 3; ++m) {
      double sum = 0.0;
      for (const auto &risks : runs) {
        sum += risks[m];
      }
      const double mean = sum / count;
      double ss = 0.0;
      for (const auto &risks : runs) {
        ss += (risks[m] - mean) * (risks[m] - mean);
      }
      const double se = runs.size() > 1 ? std::sqrt(ss / (count - 1.0) / count) : 0.0;
      summary.curve[m][n] = CurvePoint{mean, se};
    }
  }
  if (table.size() >= 2) {
    for (std::size_t m = 0; m < 3; ++m) {
      std::map<Eigen::Index, double> means;
      for (const auto &[n, point] : summary.curve[m]) {
        means[n] = point.mean;
      }
      summary.slopes[m] = fit_loglog_slope(means);
    }
  }
  return summary;
}

std::string trials_csv(const std::vector<TrialRecord> &records) {
  std::string out = std::string("# schema_version=") + kTrialsSchema + "\n";
  out += "n,run,method,seed,excess_risk,chosen_lambda\n";
  for (const auto &r : records) {
    out += csv_line({std::to_string(r.n), std::to_string(r.run), std::string(method_name(r.method)),
                     std::to_string(r.seed), format_double(r.excess_risk),
                     format_double(r.chosen_lambda)});
  }
  return out;
}

std::string curve_csv(const SimulationSummary &summary) {
  std::string out = std::string("# schema_version=") + kCurveSchema + "\n";
  out += "n,method,mean,stderr\n";
  for (Method method : kAllMethods) {
    for (const auto &[n, point] : summary.curve[index_of(method)]) {
      out += csv_line({std::to_string(n), std::string(method_name(method)),
                       format_double(point.mean), format_double(point.std_error)});
    }
  }
  return out;
}

std::string slopes_json(const SimConfig &cfg, const SimulationSummary &summary,
                        const BootstrapResult &bootstrap) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema_version"] = kSlopesSchema;
  j["config"] = {{"n_grid", cfg.n_grid},
                 {"runs_per_n", cfg.runs_per_n},
                 {"shift_exponent", cfg.shift_exponent},
                 {"noise_sd", cfg.noise_sd},
                 {"eval_points", cfg.eval_points},
                 {"bootstrap_reps", cfg.bootstrap_reps},
                 {"master_seed", cfg.master_seed}};
  ordered_json methods = ordered_json::object();
  for (Method method : kAllMethods) {
    const std::size_t m = index_of(method);
    const SlopeFit &fit = summary.slopes[m];
    ordered_json means = ordered_json::array();
    for (const auto &[n, mean] : fit.per_n_means) {
      means.push_back({{"n", n}, {"mean", mean}});
    }
    ordered_json replicates = ordered_json::array();
    const std::size_t shown = std::min(kReplicatesEmitted, bootstrap.replicates[m].size());
    for (std::size_t r = 0; r < shown; ++r) {
      replicates.push_back({{"alpha", bootstrap.replicates[m][r].first},
                            {"intercept", bootstrap.replicates[m][r].second}});
    }
    methods[std::string(method_name(method))] = {
        {"alpha", fit.alpha_hat},
        {"intercept", fit.intercept},
        {"alpha_ci95", {bootstrap.alpha[m].lower, bootstrap.alpha[m].upper}},
        {"per_n_means", std::move(means)},
        {"residuals", fit.residuals},
        {"replicates", std::move(replicates)}};
  }
  j["methods"] = std::move(methods);
  j["bootstrap"] = {
      {"reps", bootstrap.reps},
      {"pl_minus_oracle_ci95", {bootstrap.pl_minus_oracle.lower, bootstrap.pl_minus_oracle.upper}},
      {"pl_minus_naive_ci95", {bootstrap.pl_minus_naive.lower, bootstrap.pl_minus_naive.upper}}};
  return j.dump(2) + "\n";
}

}  // namespace shiftkrr::sim
