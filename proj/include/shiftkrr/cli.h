#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace shiftkrr::cli {

enum class Subcommand { RunSim, Bounds, CheckOracle, Fit };

struct RunSimOptions {
  std::vector<long long> n_grid = {500, 1000, 2000, 4000, 8000};
  int runs = 20;
  double noise_sd = 1.0;
  long long eval_points = 1000;
  int bootstrap_reps = 10000;
  double shift_exponent = 1.0 / 3.0;
};

struct BoundsOptions {
  std::optional<std::filesystem::path> sigma;
  std::optional<std::filesystem::path> sigma0;
  std::optional<std::filesystem::path> spectrum;
  double lambda = 0.0;
  std::optional<double> lambda_tilde;
  double delta = 0.2;
  long long n = 1;
  long long n0 = 1;
  double rho = 0.5;
  long long m = 2;
  double noise_sd = 1.0;
  double theta_norm = 1.0;
  std::vector<double> r_grid;
  double c0 = 1.0;
};

struct CheckOracleOptions {
  int instances = 1000;
  int max_m = 8;
  int max_n = 50;
};

struct FitOptions {
  std::filesystem::path train;
  std::filesystem::path target;
  std::string kernel = "sobolev";
  double rho = 0.5;
  std::vector<double> grid;
  std::optional<double> lambda_tilde;
  bool theory_grid = false;
  double grid_constant = 1.0;
  double kernel_bound = 1.0;
  double delta = 0.2;
};

struct CliConfig {
  Subcommand subcommand = Subcommand::RunSim;
  std::optional<std::filesystem::path> config_path;
  /// key=value pairs read from the config file, in file order.
  std::vector<std::pair<std::string, std::string>> overrides;
  std::filesystem::path out_dir = ".";
  std::uint64_t seed = 0;
  unsigned threads = 1;

  RunSimOptions run_sim;
  BoundsOptions bounds;
  CheckOracleOptions check_oracle;
  FitOptions fit;
};

struct ParseResult {
  /// Set when a job should run; empty after --help or an error.
  std::optional<CliConfig> config;
  int exit_code = 0;
};

/*
 * Strict parse of `<program> <subcommand> [--flag value ...]`.
 *
 * `--config FILE` names a flat key=value file (one `key = value` per line,
 * `#` starts a comment line); keys are the subcommand's flag names without
 * the leading dashes. Command-line flags override file entries. Unknown flags,
 * keys or subcommands are errors. Help and error text go to `out` / `err`.
 */
ParseResult parse_args(const std::vector<std::string> &argv, std::ostream &out, std::ostream &err);

/// Runs the job, writes its output files into cfg.out_dir and prints a
/// one-line summary. Returns the process exit code.
int run(const CliConfig &cfg, std::ostream &out, std::ostream &err);

}  // namespace shiftkrr::cli
