// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "shiftkrr/cli.h"
#include "shiftkrr/kernels.h"
#include "shiftkrr/krr.h"
#include "shiftkrr/shiftselect.h"
#include "shiftkrr/simlab.h"
#include "shiftkrr/textio.h"
#include "shiftkrr/theory.h"
#include "test_support.h"

namespace fs = std::filesystem;
using namespace shiftkrr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string &title, double limit_seconds,
            const std::function<Outcome()> &body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception &e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = limit_seconds <= 0.0 || secs <= limit_seconds;
  const bool pass = out.pass && in_time;
  failures += pass ? 0 : 1;
  std::printf("[%s] %d %s: %s; %.2fs%s\n", pass ? "PASS" : "FAIL", id, title.c_str(),
              out.detail.c_str(), secs,
              in_time ? "" : (" exceeds " + format_double(limit_seconds) + "s").c_str());
  std::fflush(stdout);
}

std::string fmt(double v) { return format_double(v); }

std::string slurp(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

CovariateMatrix unit_column(std::mt19937_64 &rng, int n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CovariateMatrix x(n, 1);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = unit(rng);
  }
  return x;
}

Outcome oracle_inequality() {
  const auto r = theory::check_oracle_inequality(1000, 8, 50, 20260101);
  return {r.instances == 1000 && r.violations == 0,
          std::to_string(r.violations) + "/" + std::to_string(r.instances) +
              " violations, min slack " + fmt(r.min_slack)};
}

Outcome ridge_equivalence() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> pick_n(1, 100);
  std::uniform_int_distribution<int> pick_d(1, 10);
  std::uniform_real_distribution<double> pick_log_lambda(-4.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = pick_n(rng);
    const int d = pick_d(rng);
    const double lambda = std::pow(10.0, pick_log_lambda(rng));
    const Eigen::MatrixXd x = testing::random_matrix(rng, n, d);
    const Eigen::VectorXd y = testing::random_vector(rng, n);
    const Eigen::MatrixXd x_new = testing::random_matrix(rng, 10, d);
    const Eigen::VectorXd expected = x_new * testing::primal_ridge(x, y, lambda);
    const Eigen::VectorXd got = predict(fit_krr(KernelSpec::linear(), x, y, lambda), x_new);
    worst = std::max(worst, (got - expected).norm() / std::max(expected.norm(), 1e-300));
  }
  return {worst <= 1e-8, "max relative error " + fmt(worst)};
}

Outcome bound_formulas() {
  theory::BoundInputs in;
  in.sigma = Eigen::MatrixXd::Identity(1, 1);
  in.sigma0 = in.sigma;
  in.n = 100;
  in.rho = 0.5;
  in.m = 2;
  in.delta = 0.2;
  const double e = theory::candidate_bound(in, 1.0);
  const double xi = theory::overhead_bound(in, 1.0);
  const double e_hand = 0.5 + 0.5 * std::log(10.0) / 50.0;
  const double xi_hand = (1.0 + std::log(10.0) / 50.0) * 1.5;
  bool pass = std::abs(e - e_hand) <= 1e-9 && std::abs(xi - xi_hand) <= 1e-9;

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pick_d(1, 6);
  std::uniform_real_distribution<double> pick(0.1, 2.0);
  int scaling_failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    theory::BoundInputs r = in;
    const int d = pick_d(rng);
    r.sigma = testing::random_spd(rng, d);
    r.sigma0 = testing::random_spd(rng, d);
    r.noise_sd = pick(rng);
    r.theta_norm = pick(rng);
    const double lambda = 0.1 * pick(rng);
    const double base = theory::candidate_bound(r, lambda);
    for (double t : {2.0, 4.0, 8.0}) {
      scaling_failures += theory::candidate_bound(r, t * lambda) >= base / t * (1 - 1e-12) ? 0 : 1;
    }
  }
  pass = pass && scaling_failures == 0;
  return {pass, "E=" + fmt(e) + " xi=" + fmt(xi) + ", scaling-law failures " +
                    std::to_string(scaling_failures) + "/300"};
}

Outcome property_suites() {
  constexpr int kCases = 200;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int fails[5] = {0, 0, 0, 0, 0};

  const std::vector<KernelSpec> kernels = {
      KernelSpec::linear(),          KernelSpec::affine(),     KernelSpec::polynomial(2, true),
      KernelSpec::polynomial(3, false), KernelSpec::gaussian(2.0), KernelSpec::laplace(1.0),
      KernelSpec::sobolev()};
  for (int c = 0; c < kCases; ++c) {
    const KernelSpec &spec = kernels[static_cast<std::size_t>(c) % kernels.size()];
    const int n = 1 + c % 40;
    const CovariateMatrix x = spec.kind() == KernelKind::Sobolev
                                  ? unit_column(rng, n)
                                  : CovariateMatrix(testing::random_matrix(rng, n, 1 + c % 5, 0.7));
    const Eigen::MatrixXd K = gram_matrix(spec, x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K, Eigen::EigenvaluesOnly);
    fails[0] += K == K.transpose() && eig.eigenvalues().minCoeff() >= -1e-8 * K.trace() ? 0 : 1;
  }

  for (int c = 0; c < kCases; ++c) {
    const int n1 = 10 + c % 30;
    LabeledSet d1{unit_column(rng, n1), testing::random_vector(rng, n1)};
    const UnlabeledSet x0{unit_column(rng, 50)};
    const std::vector<double> grid = {1e-4, 4e-4, 1.6e-3, 6.4e-3, 2.56e-2, 0.1024, 0.4096, 1.6384};
    const CandidateSet cands = train_candidates(KernelSpec::sobolev(), d1, grid);
    const Eigen::VectorXd pseudo = testing::random_vector(rng, 50, 0.5);
    std::map<double, Eigen::VectorXd> preds;
    for (const auto &[lambda, model] : cands) {
      preds.emplace(lambda, predict(model, x0.x));
    }
    fails[1] += select_model(cands, x0, pseudo).chosen_lambda ==
                        testing::brute_force_argmin(preds, pseudo)
                    ? 0
                    : 1;
  }

  int dim_cases = 0;
  while (dim_cases < kCases) {
    std::vector<double> mu(1 + dim_cases % 40);
    for (double &v : mu) {
      v = unit(rng);
    }
    std::sort(mu.rbegin(), mu.rend());
    const double r = unit(rng);
    const long long expected = testing::linear_scan_dim(mu, r);
    if (expected == 0) {
      continue;
    }
    ++dim_cases;
    fails[2] += theory::effective_dim({mu, 1.0}, r) == expected ? 0 : 1;
  }

  for (int c = 0; c < kCases; ++c) {
    const int m = 1 + c % 8;
    const int n = 1 + c % 50;
    PredictionSet preds;
    for (int j = 0; j < m; ++j) {
      preds.emplace(0.1 * (j + 1), testing::random_vector(rng, n));
    }
    const Eigen::VectorXd truth = testing::random_vector(rng, n);
    const Eigen::VectorXd pseudo = truth + testing::random_vector(rng, n, 0.5);
    const double u = theory::selection_overhead_U(preds, pseudo, truth);
    const double expected = testing::brute_force_overhead(preds, pseudo, truth);
    fails[3] += std::abs(u - expected) <= 1e-12 * (1 + u) ? 0 : 1;
  }

  for (int c = 0; c < kCases; ++c) {
    const int d = 1 + c % 6;
    theory::BoundInputs in;
    in.sigma = testing::random_spd(rng, d);
    const double b = 1.0 + 9.0 * unit(rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(in.sigma);
    const Eigen::MatrixXd root = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
                                 es.eigenvectors().transpose();
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(testing::random_matrix(rng, d, d)).householderQ();
    Eigen::VectorXd contraction(d);
    for (int i = 0; i < d; ++i) {
      contraction[i] = unit(rng);
    }
    const Eigen::MatrixXd s0 = b * root * q * contraction.asDiagonal() * q.transpose() * root;
    in.sigma0 = 0.5 * (s0 + s0.transpose());
    const Eigen::MatrixXd s = theory::shift_operator(in, 1e-3);
    const double norm = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .maxCoeff();
    fails[4] += norm <= b * (1 + 1e-9) ? 0 : 1;
  }

  const int total = fails[0] + fails[1] + fails[2] + fails[3] + fails[4];
  return {total == 0, "failures psd=" + std::to_string(fails[0]) +
                          " argmin=" + std::to_string(fails[1]) +
                          " dim=" + std::to_string(fails[2]) + " U=" + std::to_string(fails[3]) +
                          " normB=" + std::to_string(fails[4]) + " over " +
                          std::to_string(kCases) + " cases each"};
}

Outcome monte_carlo_sanity() {
  const double B = 15.874010519681994;
  const auto sq = [](double x) { return std::pow(std::sin(2 * M_PI * x), 2); };
  const double truth = (1 / (B + 1)) * 2 * testing::simpson(sq, 0.0, 0.5, 2000) +
                       (B / (B + 1)) * 2 * testing::simpson(sq, 0.5, 1.0, 2000);
  const KrrModel zero(KernelSpec::sobolev(), CovariateMatrix::Constant(1, 1, 0.5),
                      Eigen::VectorXd::Zero(1), 1.0);
  Rng rng(606);
  const auto est = sim::estimate_excess_risk_with_error(zero, B, 10000, rng);
  const double z = (est.mean - truth) / est.std_error;
  return {std::abs(z) <= 3.0, "estimate " + fmt(est.mean) + " vs quadrature " + fmt(truth) +
                                  " (" + fmt(z) + " standard errors)"};
}

int run_cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  auto parsed = cli::parse_args(args, out, err);
  if (!parsed.config) {
    std::cerr << err.str();
    return parsed.exit_code == 0 ? 1 : parsed.exit_code;
  }
  const int rc = cli::run(*parsed.config, out, err);
  std::cerr << out.str() << err.str();
  return rc;
}

std::vector<std::string> desk_args(const fs::path &dir) {
  return {"shiftkrr", "run-sim", "--n-grid", "500,1000,2000,4000,8000", "--runs", "20",
          "--bootstrap-reps", "2000", "--seed", "1", "--threads", "0", "--out", dir.string()};
}

Outcome desk_reproduction(const fs::path &dir) {
  if (run_cli(desk_args(dir)) != 0) {
    return {false, "run-sim failed"};
  }
  const auto j = nlohmann::json::parse(slurp(dir / "slopes.json"));
  const auto &m = j.at("methods");
  const double pl = m.at("pseudo_label").at("alpha").get<double>();
  const double oracle = m.at("oracle").at("alpha").get<double>();
  const double naive = m.at("naive").at("alpha").get<double>();
  const auto ci = j.at("bootstrap").at("pl_minus_naive_ci95");

  const bool a = pl >= 0.35 && pl <= 0.70;
  const bool b = pl > naive;
  const bool c = std::abs(pl - oracle) <= 0.08;
  bool d = true;
  double worst_ratio = 0.0;
  const auto &pl_means = m.at("pseudo_label").at("per_n_means");
  const auto &or_means = m.at("oracle").at("per_n_means");
  for (std::size_t i = 0; i < pl_means.size(); ++i) {
    const double ratio = pl_means[i].at("mean").get<double>() / or_means[i].at("mean").get<double>();
    worst_ratio = std::max(worst_ratio, ratio);
    d = d && ratio <= 1.3;
  }
  const std::string detail = "alpha_pl=" + fmt(pl) + " alpha_oracle=" + fmt(oracle) +
                             " alpha_naive=" + fmt(naive) + " pl-naive ci95=[" +
                             fmt(ci[0].get<double>()) + ", " + fmt(ci[1].get<double>()) +
                             "] max PL/Oracle=" + fmt(worst_ratio) + "; (a)" + (a ? "ok" : "no") +
                             " (b)" + (b ? "ok" : "no") + " (c)" + (c ? "ok" : "no") + " (d)" +
                             (d ? "ok" : "no");
  return {a && b && c && d, detail};
}

Outcome determinism(const fs::path &first, const fs::path &second) {
  if (!fs::exists(first / "trials.csv")) {
    return {false, "first run produced no trials.csv"};
  }
  if (run_cli(desk_args(second)) != 0) {
    return {false, "second run-sim failed"};
  }
  const std::string a = slurp(first / "trials.csv");
  const std::string b = slurp(second / "trials.csv");
  return {!a.empty() && a == b, std::to_string(a.size()) + " bytes, " +
                                    (a == b ? "identical" : "different")};
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "shiftkrr_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  report(1, "oracle inequality on 1000 random instances", 5.0, oracle_inequality);
  report(2, "linear-kernel KRR equals primal ridge", 5.0, ridge_equivalence);
  report(4, "bound formulas and scaling law", 0.0, bound_formulas);
  report(5, "randomized property suites", 60.0, property_suites);
  report(6, "zero-model Monte Carlo risk", 0.0, monte_carlo_sanity);
  report(3, "desk-scale simulation slopes", 0.0, [&] { return desk_reproduction(work / "a"); });
  report(7, "run-sim determinism", 0.0, [&] { return determinism(work / "a", work / "b"); });

  std::printf("%s: %d failing criteria\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
