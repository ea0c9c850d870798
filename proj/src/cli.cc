#include "shiftkrr/cli.h"

#include <CLI11.hpp>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "shiftkrr/errors.h"
#include "shiftkrr/krr.h"
#include "shiftkrr/shiftselect.h"
#include "shiftkrr/simlab.h"
#include "shiftkrr/textio.h"
#include "shiftkrr/theory.h"

namespace shiftkrr::cli {

namespace {

constexpr const char *kBoundsSchema = "shiftkrr.bounds/1";
constexpr const char *kOracleSchema = "shiftkrr.oracle_check/1";

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidArgument("cannot open config file " + path.string());
  }
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') {
      continue;
    }
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_number) +
                            ": expected key = value");
    }
    std::string key(trim(view.substr(0, eq)));
    std::string value(trim(view.substr(eq + 1)));
    if (key.empty() || key.starts_with("-")) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_number) + ": bad key");
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

std::vector<double> parse_double_list(const std::string &text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_double(item));
  }
  require(!out.empty(), "empty list");
  return out;
}

std::vector<long long> parse_int_list(const std::string &text) {
  std::vector<long long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_int(item));
  }
  require(!out.empty(), "empty list");
  return out;
}

const char *subcommand_name(Subcommand sub) {
  switch (sub) {
    case Subcommand::RunSim:
      return "run-sim";
    case Subcommand::Bounds:
      return "bounds";
    case Subcommand::CheckOracle:
      return "check-oracle";
    case Subcommand::Fit:
      return "fit";
  }
  return "";
}

void add_common(CLI::App *sub, CliConfig &cfg) {
  sub->add_option("--config", cfg.config_path, "key=value file; flags override its entries");
  sub->add_option("--out", cfg.out_dir, "Output directory");
  sub->add_option("--seed", cfg.seed, "Random seed");
}

}  // namespace

ParseResult parse_args(const std::vector<std::string> &argv, std::ostream &out,
                       std::ostream &err) {
  CliConfig cfg;
  std::string n_grid_text;
  std::string r_grid_text;
  std::string fit_grid_text;
  std::string grid_mode = "default";
  std::optional<double> lambda_tilde;

  CLI::App app{"Kernel ridge regression under covariate shift with pseudo-label model selection",
               "shiftkrr"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  auto *run_sim = app.add_subcommand("run-sim", "Monte Carlo comparison of selection strategies");
  add_common(run_sim, cfg);
  run_sim->add_option("--n-grid", n_grid_text, "Comma-separated even sample sizes");
  run_sim->add_option("--runs", cfg.run_sim.runs, "Runs per sample size");
  run_sim->add_option("--noise-sd", cfg.run_sim.noise_sd, "Label noise standard deviation");
  run_sim->add_option("--eval-points", cfg.run_sim.eval_points,
                      "Fresh target draws per excess-risk estimate");
  run_sim->add_option("--bootstrap-reps", cfg.run_sim.bootstrap_reps, "Cluster bootstrap replicates");
  run_sim->add_option("--shift-exponent", cfg.run_sim.shift_exponent, "B = n^exponent");
  run_sim->add_option("--threads", cfg.threads, "Worker threads (0 = auto)");

  auto *bounds = app.add_subcommand("bounds", "Evaluate excess-risk and overhead bounds");
  add_common(bounds, cfg);
  bounds->add_option("--sigma", cfg.bounds.sigma, "Source second-moment matrix (CSV)");
  bounds->add_option("--sigma0", cfg.bounds.sigma0, "Target second-moment matrix (CSV)");
  bounds->add_option("--spectrum", cfg.bounds.spectrum,
                     "Target eigenvalues, one per line (replaces --sigma0)");
  bounds->add_option("--lambda", cfg.bounds.lambda, "Candidate penalty")->required();
  bounds->add_option("--lambda-tilde", lambda_tilde, "Imputer penalty (default 1/(10 rho n))");
  bounds->add_option("--delta", cfg.bounds.delta, "Exceptional probability in (0, 1/5]");
  bounds->add_option("--n", cfg.bounds.n, "Source sample size");
  bounds->add_option("--n0", cfg.bounds.n0, "Target sample size");
  bounds->add_option("--rho", cfg.bounds.rho, "Split fraction");
  bounds->add_option("--m", cfg.bounds.m, "Penalty grid size");
  bounds->add_option("--noise-sd", cfg.bounds.noise_sd, "Noise scale sigma");
  bounds->add_option("--theta-norm", cfg.bounds.theta_norm, "RKHS norm of the true function");
  bounds->add_option("--r-grid", r_grid_text, "Comma-separated thresholds for D(r) (spectrum only)");
  bounds->add_option("--c0", cfg.bounds.c0, "Regular-spectrum constant");

  auto *check = app.add_subcommand("check-oracle",
                                   "Check the deterministic selection inequality on random instances");
  add_common(check, cfg);
  check->add_option("--instances", cfg.check_oracle.instances, "Number of instances");
  check->add_option("--max-m", cfg.check_oracle.max_m, "Maximum number of candidates");
  check->add_option("--max-n", cfg.check_oracle.max_n, "Maximum vector length");

  auto *fit = app.add_subcommand("fit", "Run the selection pipeline on CSV data");
  add_common(fit, cfg);
  fit->add_option("--train", cfg.fit.train, "Labeled source CSV: x columns then y")->required();
  fit->add_option("--target", cfg.fit.target, "Unlabeled target CSV: x columns")->required();
  fit->add_option("--kernel", cfg.fit.kernel, "Kernel spec string");
  fit->add_option("--rho", cfg.fit.rho, "Fraction of source data for the imputer");
  fit->add_option("--grid", fit_grid_text, "Comma-separated penalties (default recipe if absent)");
  fit->add_option("--lambda-tilde", lambda_tilde, "Imputer penalty");
  fit->add_option("--grid-mode", grid_mode, "default | theory")
      ->check(CLI::IsMember({"default", "theory"}));
  fit->add_option("--grid-constant", cfg.fit.grid_constant, "Constant C of the theory grid");
  fit->add_option("--kernel-bound", cfg.fit.kernel_bound, "Bound M on sqrt(K(x, x))");
  fit->add_option("--delta", cfg.fit.delta, "Exceptional probability for the theory grid");

  // Splice config-file entries in front of the command-line flags; with
  // TakeLast, later (command-line) occurrences win.
  std::vector<std::string> tokens = argv;
  if (tokens.empty()) {
    tokens.emplace_back("shiftkrr");
  }
  try {
    std::optional<std::string> config_file;
    for (std::size_t i = 2; i < tokens.size(); ++i) {
      if (tokens[i] == "--config" && i + 1 < tokens.size()) {
        config_file = tokens[i + 1];
      } else if (tokens[i].starts_with("--config=")) {
        config_file = tokens[i].substr(9);
      }
    }
    if (config_file && tokens.size() >= 2) {
      cfg.overrides = read_config_file(*config_file);
      std::vector<std::string> spliced(tokens.begin(), tokens.begin() + 2);
      for (const auto &[key, value] : cfg.overrides) {
        spliced.push_back("--" + key);
        spliced.push_back(value);
      }
      spliced.insert(spliced.end(), tokens.begin() + 2, tokens.end());
      tokens = std::move(spliced);
    }
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return {std::nullopt, 2};
  }

  std::vector<const char *> raw;
  raw.reserve(tokens.size());
  for (const auto &t : tokens) {
    raw.push_back(t.c_str());
  }
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return {std::nullopt, code};
  }

  try {
    if (run_sim->parsed()) {
      cfg.subcommand = Subcommand::RunSim;
      if (!n_grid_text.empty()) {
        cfg.run_sim.n_grid = parse_int_list(n_grid_text);
      }
    } else if (bounds->parsed()) {
      cfg.subcommand = Subcommand::Bounds;
      cfg.bounds.lambda_tilde = lambda_tilde;
      if (!r_grid_text.empty()) {
        cfg.bounds.r_grid = parse_double_list(r_grid_text);
      }
      require(cfg.bounds.sigma0 || cfg.bounds.spectrum, "bounds needs --sigma0 or --spectrum");
      require(!(cfg.bounds.sigma0 && cfg.bounds.spectrum),
              "--sigma0 and --spectrum are mutually exclusive");
      require(cfg.bounds.spectrum || cfg.bounds.sigma, "--sigma0 requires --sigma");
    } else if (check->parsed()) {
      cfg.subcommand = Subcommand::CheckOracle;
    } else {
      cfg.subcommand = Subcommand::Fit;
      cfg.fit.lambda_tilde = lambda_tilde;
      cfg.fit.theory_grid = grid_mode == "theory";
      if (!fit_grid_text.empty()) {
        cfg.fit.grid = parse_double_list(fit_grid_text);
      }
      require(!(cfg.fit.theory_grid && !cfg.fit.grid.empty()),
              "--grid and --grid-mode theory are mutually exclusive");
    }
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return {std::nullopt, 2};
  }
  return {std::move(cfg), 0};
}

namespace {

int run_sim_job(const CliConfig &cfg, std::ostream &out) {
  sim::SimConfig sc;
  sc.n_grid.assign(cfg.run_sim.n_grid.begin(), cfg.run_sim.n_grid.end());
  sc.runs_per_n = cfg.run_sim.runs;
  sc.noise_sd = cfg.run_sim.noise_sd;
  sc.eval_points = cfg.run_sim.eval_points;
  sc.bootstrap_reps = cfg.run_sim.bootstrap_reps;
  sc.shift_exponent = cfg.run_sim.shift_exponent;
  sc.master_seed = cfg.seed;
  sc.validate();

  const auto records = sim::run_simulation(sc, cfg.threads);
  const auto summary = sim::summarize(records);
  write_file_atomically(cfg.out_dir / "trials.csv", sim::trials_csv(records));
  write_file_atomically(cfg.out_dir / "curve.csv", sim::curve_csv(summary));

  if (summary.curve[0].size() < 2) {
    out << "run-sim: " << records.size() << " trials written; slopes need >= 2 sample sizes\n";
    return 0;
  }
  Rng rng(sim::bootstrap_seed(sc.master_seed));
  const auto bootstrap = sim::cluster_bootstrap(records, sc.bootstrap_reps, rng);
  write_file_atomically(cfg.out_dir / "slopes.json", sim::slopes_json(sc, summary, bootstrap));
  out << "run-sim: " << records.size() << " trials; alpha pseudo_label="
      << format_double(summary.slopes[0].alpha_hat)
      << " oracle=" << format_double(summary.slopes[1].alpha_hat)
      << " naive=" << format_double(summary.slopes[2].alpha_hat) << "; pl-naive ci95=["
      << format_double(bootstrap.pl_minus_naive.lower) << ", "
      << format_double(bootstrap.pl_minus_naive.upper) << "]\n";
  return 0;
}

int bounds_job(const CliConfig &cfg, std::ostream &out) {
  const BoundsOptions &b = cfg.bounds;
  theory::BoundInputs in;
  std::optional<theory::SpectrumInputs> spectrum;
  if (b.spectrum) {
    const Eigen::MatrixXd values = read_csv_matrix(*b.spectrum);
    require(values.cols() == 1, "spectrum file must have one eigenvalue per line");
    spectrum = theory::SpectrumInputs{{values.col(0).data(), values.col(0).data() + values.rows()},
                                      b.c0};
    spectrum->validate();
    in.sigma0 = values.col(0).asDiagonal();
    in.sigma = b.sigma ? read_csv_matrix(*b.sigma) : in.sigma0;
  } else {
    in.sigma = read_csv_matrix(*b.sigma);
    in.sigma0 = read_csv_matrix(*b.sigma0);
  }
  in.noise_sd = b.noise_sd;
  in.theta_norm = b.theta_norm;
  in.n = b.n;
  in.n0 = b.n0;
  in.rho = b.rho;
  in.m = b.m;
  in.delta = b.delta;
  in.validate();

  const double lambda_tilde =
      b.lambda_tilde.value_or(1.0 / (10.0 * b.rho * static_cast<double>(b.n)));
  const Eigen::MatrixXd s = theory::shift_operator(in, b.lambda);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);

  nlohmann::ordered_json j;
  j["schema_version"] = kBoundsSchema;
  j["lambda"] = b.lambda;
  j["S_norm"] = eig.eigenvalues().maxCoeff();
  j["S_trace"] = s.trace();
  j["E"] = theory::candidate_bound(in, b.lambda);
  j["lambda_tilde"] = lambda_tilde;
  j["xi"] = theory::overhead_bound(in, lambda_tilde);
  j["sample_size_condition"] = theory::sample_size_condition(in);
  if (spectrum && !b.r_grid.empty()) {
    const auto report = theory::regular_spectrum_check(*spectrum, b.r_grid);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto &row : report.rows) {
      rows.push_back({{"r", row.r},
                      {"D", row.dim},
                      {"tail", row.tail},
                      {"bound", row.bound},
                      {"ratio", row.ratio},
                      {"passes", row.passes}});
    }
    j["regularity"] = {{"c0", spectrum->c0},
                       {"worst_ratio", report.worst_ratio},
                       {"all_pass", report.all_pass},
                       {"rows", std::move(rows)}};
  }
  write_file_atomically(cfg.out_dir / "bounds.json", j.dump(2) + "\n");
  out << "bounds: lambda=" << format_double(b.lambda)
      << " E=" << format_double(j["E"].get<double>())
      << " xi=" << format_double(j["xi"].get<double>()) << "\n";
  return 0;
}

int check_oracle_job(const CliConfig &cfg, std::ostream &out) {
  const auto &c = cfg.check_oracle;
  const auto report = theory::check_oracle_inequality(c.instances, c.max_m, c.max_n, cfg.seed);
  nlohmann::ordered_json j;
  j["schema_version"] = kOracleSchema;
  j["instances"] = report.instances;
  j["violations"] = report.violations;
  j["min_slack"] = report.min_slack;
  j["max_m"] = c.max_m;
  j["max_n"] = c.max_n;
  j["seed"] = cfg.seed;
  write_file_atomically(cfg.out_dir / "oracle_check.json", j.dump(2) + "\n");
  out << "check-oracle: " << report.instances << " instances, " << report.violations
      << " violations, min slack " << format_double(report.min_slack) << "\n";
  return report.violations == 0 ? 0 : 3;
}

int fit_job(const CliConfig &cfg, std::ostream &out) {
  const FitOptions &f = cfg.fit;
  const KernelSpec spec = KernelSpec::parse(f.kernel);
  const Eigen::MatrixXd train = read_csv_matrix(f.train);
  require(train.cols() >= 2, "training CSV needs at least one covariate column and a label");
  LabeledSet data{train.leftCols(train.cols() - 1), train.col(train.cols() - 1)};
  UnlabeledSet target{read_csv_matrix(f.target)};
  require(target.x.cols() == data.x.cols(), "target CSV has a different number of covariates");

  PipelineConfig pc;
  pc.rho = f.rho;
  pc.seed = cfg.seed;
  pc.lambda_grid = f.grid;
  pc.imputer_lambda = f.lambda_tilde;
  if (f.theory_grid) {
    const TheoryGrid tg = theory_lambda_grid(data.size(), f.rho, f.delta,
                                             f.kernel_bound * f.kernel_bound, f.grid_constant);
    pc.lambda_grid = tg.lambda_grid;
    if (!pc.imputer_lambda) {
      pc.imputer_lambda = tg.imputer_lambda;
    }
  }
  const SelectionResult result = run_pipeline(spec, data, target, pc);
  write_file_atomically(cfg.out_dir / "selection.json", result.to_json());
  write_file_atomically(cfg.out_dir / "model.json", result.chosen_model.to_json() + "\n");
  out << "fit: chose lambda=" << format_double(result.chosen_lambda) << " (n1=" << result.n1
      << ", n2=" << result.n2 << ", " << result.pseudo_risk_per_lambda.size()
      << " candidates)\n";
  return 0;
}

}  // namespace

int run(const CliConfig &cfg, std::ostream &out, std::ostream &err) {
  try {
    std::filesystem::create_directories(cfg.out_dir);
    switch (cfg.subcommand) {
      case Subcommand::RunSim:
        return run_sim_job(cfg, out);
      case Subcommand::Bounds:
        return bounds_job(cfg, out);
      case Subcommand::CheckOracle:
        return check_oracle_job(cfg, out);
      case Subcommand::Fit:
        return fit_job(cfg, out);
    }
  } catch (const InvalidArgument &e) {
    err << subcommand_name(cfg.subcommand) << ": invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    err << subcommand_name(cfg.subcommand) << ": " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace shiftkrr::cli
