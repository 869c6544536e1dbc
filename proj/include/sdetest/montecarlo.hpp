#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "sdetest/error.hpp"
#include "sdetest/estimate.hpp"
#include "sdetest/format.hpp"
#include "sdetest/hypothesis_tests.hpp"
#include "sdetest/model.hpp"
#include "sdetest/params.hpp"
#include "sdetest/quasi_likelihood.hpp"
#include "sdetest/rng.hpp"
#include "sdetest/simulate.hpp"

namespace sdetest {

inline std::vector<double> default_h_grid() {
  return {0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

/// Parameter values of the reference power study for a built-in model.
inline ParamVector reference_theta0(const std::string& model_id) {
  if (model_id == "ou") return ParamVector({0.5, 0.5}, {0.25});
  if (model_id == "cir") return ParamVector({0.5, 0.5}, {0.125});
  throw Error(ErrorCode::invalid_argument, "unknown model id '" + model_id + "' (expected ou or cir)");
}

/// The five statistics compared in the reference power tables.
inline std::vector<StatKind> default_statistics() {
  return {StatKind::AKL, StatKind::GQLRT, StatKind::BS, StatKind::RAO, StatKind::T};
}

struct ExperimentConfig {
  std::string model_id = "ou";
  ParamVector theta0{{0.5, 0.5}, {0.25}};
  ParamBox box = default_box();
  Contrast contrast = Contrast::corrected;
  std::size_t n = 100;
  /// Observation step; when unset, the n^(-2/3) schedule is used.
  std::optional<double> delta;
  std::size_t refine = 30;
  double x0 = 1.0;
  std::vector<double> h_grid = default_h_grid();
  /// Per-coordinate multipliers of the scalar h; empty means all ones.
  std::vector<double> h_direction;
  double level = 0.05;
  std::size_t replications = 1000;
  std::uint64_t master_seed = 1;
  std::vector<StatKind> statistics = default_statistics();
  ThresholdMode threshold_mode = ThresholdMode::empirical;

  double step() const { return delta ? *delta : observation_schedule(n).delta; }

  Model model() const { return make_model(model_id, box); }

  Eigen::VectorXd h_vector(double h) const {
    const auto m = static_cast<Eigen::Index>(theta0.size());
    Eigen::VectorXd v = Eigen::VectorXd::Constant(m, h);
    if (!h_direction.empty()) {
      for (Eigen::Index j = 0; j < m; ++j) v[j] *= h_direction[static_cast<std::size_t>(j)];
    }
    return v;
  }

  void validate() const {
    const Model m = model();
    m.check_theta(theta0);
    require(box.contains(theta0), "experiment: theta0 outside the parameter box");
    require(n >= 2, "experiment: n must be at least 2");
    require(step() > 0.0, "experiment: delta must be positive");
    require(refine >= 1, "experiment: refine must be at least 1");
    require(m.state_domain.contains(x0), "experiment: x0 outside the state domain");
    require(level > 0.0 && level < 1.0, "experiment: level must lie in (0, 1)");
    require(replications >= 50, "experiment: at least 50 replications are required");
    require(!h_grid.empty() && std::find(h_grid.begin(), h_grid.end(), 0.0) != h_grid.end(),
            "experiment: h grid must contain 0");
    require(h_direction.empty() || h_direction.size() == theta0.size(),
            "experiment: h direction must have one entry per parameter");
    require(!statistics.empty(), "experiment: no statistics requested");
    if (threshold_mode == ThresholdMode::asymptotic) {
      require(std::find(statistics.begin(), statistics.end(), StatKind::BS) == statistics.end(),
              "experiment: BS requires empirical thresholds");
    }
  }
};

/// theta0 shifted by h/sqrt(n Delta) in the drift block and h/sqrt(n) in the diffusion block.
inline ParamVector local_alternative(const ParamVector& theta0, const Eigen::VectorXd& h, std::size_t n, double delta,
                                     const ParamBox& box) {
  require(h.size() == static_cast<Eigen::Index>(theta0.size()), "local_alternative: h has the wrong dimension");
  require(n >= 1 && delta > 0.0, "local_alternative: need n >= 1 and delta > 0");
  ParamVector theta = theta0;
  const double nd = static_cast<double>(n);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double rate = j < theta.m1() ? std::sqrt(nd * delta) : std::sqrt(nd);
    theta[j] += h[static_cast<Eigen::Index>(j)] / rate;
  }
  const std::size_t bad = box.first_violation(theta);
  if (bad < box.size()) throw BoundaryError(bad, "local alternative leaves the parameter box");
  return theta;
}

inline ParamVector local_alternative(const ParamVector& theta0, double h, std::size_t n, double delta,
                                     const ParamBox& box) {
  return local_alternative(theta0, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(theta0.size()), h), n, delta,
                           box);
}

/// Fits a replication; receives the hypothesised parameter so it can be used as an extra start.
using Estimator = std::function<FitResult(const QLContext&, const ParamVector& theta_null)>;

struct RunOptions {
  std::size_t workers = 1;
  EstimateOptions estimate{};
  /// Replaces the default estimator (mqle with theta_null as an extra start).
  Estimator estimator;
  double failure_budget = 0.05;
};

/// Everything computed for one simulated path.
struct ReplicationOutcome {
  bool fitted = false;
  FitResult fit;
  std::string error;
  /// Indexed like ExperimentConfig::statistics; NaN marks a failed statistic.
  std::vector<double> statistics;
};

struct Batch {
  double h = 0.0;
  ParamVector theta;
  std::vector<ReplicationOutcome> replications;

  std::vector<double> successes(std::size_t stat_index) const {
    std::vector<double> out;
    for (const auto& r : replications) {
      if (stat_index < r.statistics.size() && std::isfinite(r.statistics[stat_index])) {
        out.push_back(r.statistics[stat_index]);
      }
    }
    return out;
  }

  std::size_t failures(std::size_t stat_index) const { return replications.size() - successes(stat_index).size(); }
};

namespace detail {

inline double raw_statistic(StatKind kind, const QLContext& ctx, const FitResult& fit, const ParamVector& null,
                            std::optional<std::pair<std::vector<double>, std::vector<double>>>& stepwise,
                            const EstimateOptions& est) {
  const auto cal = Calibration::empirical(std::numeric_limits<double>::infinity());
  switch (kind) {
    case StatKind::T: return t_statistic(ctx, fit.theta_hat, null, cal).statistic;
    case StatKind::GQLRT: return gqlrt_statistic(ctx, fit.theta_hat, null, cal).statistic;
    case StatKind::WALD: return wald_statistic(ctx, fit.theta_hat, null, cal).statistic;
    case StatKind::RAO: return rao_statistic(ctx, fit.theta_hat, null, cal).statistic;
    case StatKind::AKL: return phi_divergence_statistic(ctx, fit.theta_hat, null, PhiKind::AKL, cal).statistic;
    case StatKind::BS: return phi_divergence_statistic(ctx, fit.theta_hat, null, PhiKind::BS, cal).statistic;
    case StatKind::STEP_BETA:
    case StatKind::STEP_ALPHA: {
      if (!stepwise) {
        auto beta = initial_beta(ctx, est).beta;
        auto alpha = adaptive_alpha_step(ctx, beta, est);
        stepwise.emplace(std::move(alpha), std::move(beta));
      }
      if (kind == StatKind::STEP_BETA) return stepwise_beta(ctx, stepwise->second, null.beta, cal).statistic;
      return stepwise_alpha(ctx, stepwise->first, null.alpha, stepwise->second, cal).statistic;
    }
  }
  return std::nan("");
}

inline ReplicationOutcome run_replication(const ExperimentConfig& cfg, const Model& model, const ParamVector& theta,
                                          std::size_t index, const RunOptions& opts) {
  ReplicationOutcome out;
  out.statistics.assign(cfg.statistics.size(), std::nan(""));
  try {
    const SimConfig sim{cfg.n, cfg.step(), cfg.refine, cfg.x0, derive_seed(cfg.master_seed, index)};
    const QLContext ctx(model, euler_maruyama(model, theta, sim), cfg.contrast);
    if (opts.estimator) {
      out.fit = opts.estimator(ctx, cfg.theta0);
    } else {
      EstimateOptions est = opts.estimate;
      est.extra_starts.push_back(cfg.theta0);
      out.fit = mqle(ctx, est);
    }
    out.fitted = true;
    std::optional<std::pair<std::vector<double>, std::vector<double>>> stepwise;
    for (std::size_t k = 0; k < cfg.statistics.size(); ++k) {
      try {
        const double v = raw_statistic(cfg.statistics[k], ctx, out.fit, cfg.theta0, stepwise, opts.estimate);
        out.statistics[k] = std::isfinite(v) ? v : std::nan("");
      } catch (const Error&) {
        out.statistics[k] = std::nan("");
      }
    }
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace detail

/**
 * Simulates `replications` paths at the local alternative for scalar h, fits
 * each once and evaluates every requested statistic against theta0.
 *
 * Replication r always uses seed derive_seed(master_seed, r), whatever h, the
 * statistic set or the worker count, so statistics are paired on identical paths
 * and results do not depend on scheduling.
 */
inline Batch simulate_batch(const ExperimentConfig& cfg, double h, const RunOptions& opts = {}) {
  cfg.validate();
  const Model model = cfg.model();
  Batch batch;
  batch.h = h;
  batch.theta = local_alternative(cfg.theta0, cfg.h_vector(h), cfg.n, cfg.step(), cfg.box);
  batch.replications.resize(cfg.replications);

  const std::size_t workers = std::clamp<std::size_t>(opts.workers, 1, cfg.replications);
  if (workers == 1) {
    for (std::size_t r = 0; r < cfg.replications; ++r) {
      batch.replications[r] = detail::run_replication(cfg, model, batch.theta, r, opts);
    }
    return batch;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t r = next++; r < cfg.replications; r = next++) {
        batch.replications[r] = detail::run_replication(cfg, model, batch.theta, r, opts);
      }
    });
  }
  for (auto& t : pool) t.join();
  return batch;
}

/// Upper order statistic at 1-based rank ceil((1 - level) * R) of the sorted values.
inline double empirical_quantile(std::vector<double> values, double level) {
  require(!values.empty(), "empirical_quantile: no values");
  require(level > 0.0 && level < 1.0, "empirical_quantile: level must lie in (0, 1)");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil((1.0 - level) * static_cast<double>(values.size()) - 1e-9);
  const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(rank), 1, values.size());
  return values[k - 1];
}

namespace detail {

inline void check_budget(const Batch& batch, const ExperimentConfig& cfg, double budget) {
  for (std::size_t k = 0; k < cfg.statistics.size(); ++k) {
    const std::size_t failed = batch.failures(k);
    if (static_cast<double>(failed) > budget * static_cast<double>(cfg.replications)) {
      std::string first_error;
      for (const auto& r : batch.replications) {
        if (!r.error.empty()) {
          first_error = "; first error: " + r.error;
          break;
        }
      }
      throw Error(ErrorCode::failure_budget, "failure budget exceeded for " + to_string(cfg.statistics[k]) + " at h=" +
                                                 format_double(batch.h) + ": " + std::to_string(failed) + " of " +
                                                 std::to_string(cfg.replications) + " replications failed" +
                                                 first_error);
    }
  }
}

inline std::size_t stat_index(const ExperimentConfig& cfg, StatKind kind) {
  const auto it = std::find(cfg.statistics.begin(), cfg.statistics.end(), kind);
  require(it != cfg.statistics.end(), "statistic " + to_string(kind) + " is not part of the experiment");
  return static_cast<std::size_t>(it - cfg.statistics.begin());
}

inline std::vector<double> thresholds_from(const Batch& null_batch, const ExperimentConfig& cfg) {
  std::vector<double> out;
  for (std::size_t k = 0; k < cfg.statistics.size(); ++k) {
    if (cfg.threshold_mode == ThresholdMode::empirical) {
      out.push_back(empirical_quantile(null_batch.successes(k), cfg.level));
    } else {
      const Model m = cfg.model();
      const StatKind kind = cfg.statistics[k];
      const int df = kind == StatKind::STEP_BETA ? static_cast<int>(m.m2)
                     : kind == StatKind::STEP_ALPHA ? static_cast<int>(m.m1)
                                                    : static_cast<int>(m.dim());
      out.push_back(chi2_quantile(1.0 - cfg.level, df));
    }
  }
  return out;
}

}  // namespace detail

/// Empirical (1 - level) quantile of a statistic's simulated null distribution.
inline double null_threshold(const ExperimentConfig& cfg, StatKind kind, const RunOptions& opts = {}) {
  ExperimentConfig one = cfg;
  one.statistics = {kind};
  one.threshold_mode = ThresholdMode::empirical;
  const Batch batch = simulate_batch(one, 0.0, opts);
  detail::check_budget(batch, one, opts.failure_budget);
  return empirical_quantile(batch.successes(0), cfg.level);
}

struct PowerTable {
  ExperimentConfig config;
  double delta = 0.0;
  std::vector<double> h_grid;
  std::vector<StatKind> statistics;
  std::vector<double> thresholds;               // per statistic
  std::vector<std::vector<double>> epow;        // [h][statistic]
  std::vector<std::vector<std::size_t>> failures;  // [h][statistic]

  double at(double h, StatKind kind) const {
    const auto hi = std::find(h_grid.begin(), h_grid.end(), h);
    const auto ki = std::find(statistics.begin(), statistics.end(), kind);
    require(hi != h_grid.end() && ki != statistics.end(), "PowerTable::at: no such cell");
    return epow[static_cast<std::size_t>(hi - h_grid.begin())][static_cast<std::size_t>(ki - statistics.begin())];
  }

  double threshold(StatKind kind) const {
    const auto ki = std::find(statistics.begin(), statistics.end(), kind);
    require(ki != statistics.end(), "PowerTable::threshold: no such statistic");
    return thresholds[static_cast<std::size_t>(ki - statistics.begin())];
  }
};

namespace detail {

inline void fill_row(PowerTable& table, const Batch& batch) {
  std::vector<double> row;
  std::vector<std::size_t> fails;
  for (std::size_t k = 0; k < table.statistics.size(); ++k) {
    const auto ok = batch.successes(k);
    const auto rejected = static_cast<double>(
        std::count_if(ok.begin(), ok.end(), [&](double v) { return v > table.thresholds[k]; }));
    row.push_back(ok.empty() ? std::nan("") : rejected / static_cast<double>(ok.size()));
    fails.push_back(batch.failures(k));
  }
  table.h_grid.push_back(batch.h);
  table.epow.push_back(std::move(row));
  table.failures.push_back(std::move(fails));
}

}  // namespace detail

/// Rejection frequencies over the h grid against the given thresholds (one per statistic).
inline PowerTable empirical_power(const ExperimentConfig& cfg, const std::vector<double>& thresholds,
                                  const RunOptions& opts = {}) {
  cfg.validate();
  require(thresholds.size() == cfg.statistics.size(), "empirical_power: one threshold per statistic is required");
  PowerTable table;
  table.config = cfg;
  table.delta = cfg.step();
  table.statistics = cfg.statistics;
  table.thresholds = thresholds;
  for (double h : cfg.h_grid) {
    const Batch batch = simulate_batch(cfg, h, opts);
    detail::check_budget(batch, cfg, opts.failure_budget);
    detail::fill_row(table, batch);
  }
  return table;
}

/// Thresholds from the h = 0 batch (or the chi-square quantile), then the power over the grid.
inline PowerTable run_power_study(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  const Batch null_batch = simulate_batch(cfg, 0.0, opts);
  detail::check_budget(null_batch, cfg, opts.failure_budget);
  PowerTable table;
  table.config = cfg;
  table.delta = cfg.step();
  table.statistics = cfg.statistics;
  table.thresholds = detail::thresholds_from(null_batch, cfg);
  for (double h : cfg.h_grid) {
    if (h == 0.0) {
      detail::fill_row(table, null_batch);
      continue;
    }
    const Batch batch = simulate_batch(cfg, h, opts);
    detail::check_budget(batch, cfg, opts.failure_budget);
    detail::fill_row(table, batch);
  }
  return table;
}

inline std::string power_csv_header() { return "model,n,delta,R,level,threshold_mode,h,statistic,threshold,epow,failures"; }

inline void write_power_csv(std::ostream& os, const PowerTable& t) {
  os << power_csv_header() << '\n';
  for (std::size_t i = 0; i < t.h_grid.size(); ++i) {
    for (std::size_t k = 0; k < t.statistics.size(); ++k) {
      os << t.config.model_id << ',' << t.config.n << ',' << format_double(t.delta) << ',' << t.config.replications
         << ',' << format_double(t.config.level) << ',' << to_string(t.config.threshold_mode) << ','
         << format_double(t.h_grid[i]) << ',' << to_string(t.statistics[k]) << ',' << format_double(t.thresholds[k])
         << ',' << format_double(t.epow[i][k]) << ',' << t.failures[i][k] << '\n';
    }
  }
}

/// Parses the CSV written by write_power_csv. Config fields absent from the CSV keep their defaults.
inline PowerTable read_power_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != power_csv_header()) {
    throw Error(ErrorCode::invalid_argument, "power CSV: unexpected header");
  }
  PowerTable t;
  bool first = true;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 11) throw Error(ErrorCode::invalid_argument, "power CSV: expected 11 columns");
    if (first) {
      t.config.model_id = std::string(f[0]);
      t.config.n = parse_uint(f[1]);
      t.delta = parse_double(f[2]);
      t.config.delta = t.delta;
      t.config.replications = parse_uint(f[3]);
      t.config.level = parse_double(f[4]);
      t.config.threshold_mode = parse_threshold_mode(f[5]);
      first = false;
    }
    const double h = parse_double(f[6]);
    const StatKind kind = parse_stat_kind(f[7]);
    auto hi = std::find(t.h_grid.begin(), t.h_grid.end(), h);
    if (hi == t.h_grid.end()) {
      t.h_grid.push_back(h);
      t.epow.emplace_back();
      t.failures.emplace_back();
      hi = t.h_grid.end() - 1;
    }
    const auto row = static_cast<std::size_t>(hi - t.h_grid.begin());
    if (row == 0) {
      t.statistics.push_back(kind);
      t.thresholds.push_back(parse_double(f[8]));
    }
    t.epow[row].push_back(parse_double(f[9]));
    t.failures[row].push_back(parse_uint(f[10]));
  }
  t.config.h_grid = t.h_grid;
  t.config.statistics = t.statistics;
  return t;
}

}  // namespace sdetest
