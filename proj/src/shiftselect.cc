#include "shiftkrr/shiftselect.h"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "shiftkrr/errors.h"

namespace shiftkrr {

namespace {

constexpr const char *kSelectionSchema = "shiftkrr.selection/1";

// Smallest k >= 0 with 2^k >= ratio.
int ceil_log2(double ratio) {
  int k = 0;
  while (std::ldexp(1.0, k) < ratio) {
    ++k;
  }
  return k;
}

LabeledSet take_rows(const LabeledSet &data, const std::vector<Eigen::Index> &rows) {
  LabeledSet out{CovariateMatrix(static_cast<Eigen::Index>(rows.size()), data.x.cols()),
                 Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.x.row(r) = data.x.row(rows[i]);
    out.y[r] = data.y[rows[i]];
  }
  return out;
}

}  // namespace

void validate_lambda_grid(const std::vector<double> &grid) {
  require(!grid.empty(), "penalty grid must be non-empty");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    require(std::isfinite(grid[j]) && grid[j] > 0.0, "penalties must be positive and finite");
    if (j > 0) {
      require(grid[j] > grid[j - 1], "penalty grid must be strictly increasing");
    }
  }
}

double grid_ratio(const std::vector<double> &grid) {
  validate_lambda_grid(grid);
  double beta = 1.0;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    beta = std::max(beta, grid[j] / grid[j - 1]);
  }
  return beta;
}

void PipelineConfig::validate() const {
  require(std::isfinite(rho) && rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
  if (!lambda_grid.empty()) {
    validate_lambda_grid(lambda_grid);
  }
  if (imputer_lambda) {
    require(std::isfinite(*imputer_lambda) && *imputer_lambda > 0.0,
            "imputer penalty must be positive");
  }
}

RiskScan scan_risks(const PredictionSet &predictions, const Eigen::VectorXd &target) {
  require(!predictions.empty(), "no candidates to select from");
  require(target.size() >= 1, "selection needs at least one point");
  RiskScan scan;
  scan.risks.reserve(predictions.size());
  double best = 0.0;
  bool first = true;
  for (const auto &[lambda, pred] : predictions) {
    require(pred.size() == target.size(), "prediction and target lengths differ");
    const double risk = (pred - target).squaredNorm() / static_cast<double>(target.size());
    scan.risks.emplace_back(lambda, risk);
    // Strict comparison in increasing-lambda order keeps the smallest penalty on ties.
    if (first || risk < best) {
      best = risk;
      scan.chosen_lambda = lambda;
      first = false;
    }
  }
  return scan;
}

std::string SelectionResult::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kSelectionSchema;
  j["chosen_lambda"] = chosen_lambda;
  j["n1"] = n1;
  j["n2"] = n2;
  nlohmann::json risks = nlohmann::json::array();
  for (const auto &[lambda, risk] : pseudo_risk_per_lambda) {
    risks.push_back({{"lambda", lambda}, {"pseudo_risk", risk}});
  }
  j["risks"] = std::move(risks);
  if (imputer) {
    j["imputer_lambda"] = imputer->lambda();
  }
  return j.dump(2) + "\n";
}

std::pair<Eigen::Index, Eigen::Index> split_sizes(Eigen::Index n, double rho) {
  require(n >= 2, "splitting needs at least two points");
  require(std::isfinite(rho) && rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
  const double product = rho * static_cast<double>(n);
  auto n2 = static_cast<Eigen::Index>(std::floor(product));
  // rho given as a decimal (0.29 * 100 = 28.999999999999996) should not lose a point.
  if (product - static_cast<double>(n2) > 1.0 - 1e-9) {
    ++n2;
  }
  return {n - n2, n2};
}

std::pair<LabeledSet, LabeledSet> split_data(const LabeledSet &data, double rho, Rng &rng) {
  require(data.y.size() == data.x.rows(), "label count must match number of covariate rows");
  const Eigen::Index n1 = split_sizes(data.size(), rho).first;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Eigen::Index> first(order.begin(), order.begin() + n1);
  std::vector<Eigen::Index> second(order.begin() + n1, order.end());
  return {take_rows(data, first), take_rows(data, second)};
}

std::vector<double> default_lambda_grid(Eigen::Index n1, double base_scale) {
  require(n1 >= 1, "grid needs n1 >= 1");
  require(std::isfinite(base_scale) && base_scale > 0.0, "base scale must be positive");
  const double scale = static_cast<double>(n1) * 10.0;
  const double smallest = base_scale / scale;
  const int top = ceil_log2(scale / base_scale);
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(top) + 1);
  for (int k = 0; k <= top; ++k) {
    grid.push_back(std::ldexp(smallest, k));
  }
  return grid;
}

TheoryGrid theory_lambda_grid(Eigen::Index n, double rho, double delta, double kernel_bound_sq,
                              double constant) {
  require(n >= 2, "theory grid needs n >= 2");
  require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require(kernel_bound_sq > 0.0 && constant > 0.0, "kernel bound and constant must be positive");
  const double nn = static_cast<double>(n);
  const double numerator = constant * kernel_bound_sq * std::log(nn / delta);
  const double lambda0 = numerator / ((1.0 - rho) * nn);
  TheoryGrid out;
  const int top = ceil_log2(nn);
  for (int k = 0; k <= top; ++k) {
    out.lambda_grid.push_back(std::ldexp(lambda0, k));
  }
  out.imputer_lambda = numerator / (rho * nn);
  return out;
}

CandidateSet train_candidates(const KernelSpec &spec, const LabeledSet &d1,
                              const std::vector<double> &grid) {
  validate_lambda_grid(grid);
  require(d1.size() >= 1, "candidate training set is empty");
  const Eigen::MatrixXd gram = gram_matrix(spec, d1.x);
  CandidateSet out;
  for (double lambda : grid) {
    out.emplace(lambda, fit_krr_with_gram(spec, d1.x, gram, d1.y, lambda));
  }
  return out;
}

KrrModel train_imputer(const KernelSpec &spec, const LabeledSet &d2, double lambda_tilde) {
  return fit_krr(spec, d2.x, d2.y, lambda_tilde);
}

Eigen::VectorXd pseudo_labels(const KrrModel &imputer, const UnlabeledSet &x0) {
  require(x0.size() >= 1, "target covariates are empty");
  return predict(imputer, x0.x);
}

SelectionResult select_model(const CandidateSet &candidates, const UnlabeledSet &x0,
                             const Eigen::VectorXd &pseudo_y) {
  require(!candidates.empty(), "no candidates to select from");
  require(pseudo_y.size() == x0.size(), "pseudo-label count must match target size");
  PredictionSet predictions;
  for (const auto &[lambda, model] : candidates) {
    predictions.emplace(lambda, predict(model, x0.x));
  }
  RiskScan scan = scan_risks(predictions, pseudo_y);
  const KrrModel &chosen = candidates.at(scan.chosen_lambda);
  return SelectionResult{scan.chosen_lambda, chosen, std::move(scan.risks), std::nullopt,
                         chosen.size(), 0};
}

SelectionResult run_pipeline(const KernelSpec &spec, const LabeledSet &data,
                             const UnlabeledSet &x0, const PipelineConfig &cfg) {
  cfg.validate();
  require(x0.size() >= 1, "target covariates are empty");
  Rng rng(cfg.seed);
  auto [d1, d2] = split_data(data, cfg.rho, rng);
  require(d2.size() >= 1, "imputation split is empty; increase rho or n");

  const std::vector<double> grid =
      cfg.lambda_grid.empty() ? default_lambda_grid(d1.size()) : cfg.lambda_grid;
  const double lambda_tilde =
      cfg.imputer_lambda.value_or(1.0 / (10.0 * static_cast<double>(d2.size())));

  CandidateSet candidates = train_candidates(spec, d1, grid);
  KrrModel imputer = train_imputer(spec, d2, lambda_tilde);
  SelectionResult result = select_model(candidates, x0, pseudo_labels(imputer, x0));
  result.imputer = std::move(imputer);
  result.n1 = d1.size();
  result.n2 = d2.size();
  return result;
}

}  // namespace shiftkrr
