#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdetest/error.hpp"
#include "sdetest/model.hpp"
#include "sdetest/optimize.hpp"
#include "sdetest/params.hpp"
#include "sdetest/quasi_likelihood.hpp"

namespace sdetest {

struct EstimateOptions {
  /// Default starts: box center, heuristic start, then low-discrepancy points.
  std::size_t starts = 8;
  /// Appended after the default starts (e.g. a hypothesised parameter).
  std::vector<ParamVector> extra_starts;
  opt::NelderMeadOptions nelder_mead{0.10, 1e-7, 1e-5, 1500};
  opt::PolishOptions polish{};
};

struct FitResult {
  ParamVector theta_hat;
  double objective = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool at_boundary = false;
  bool adaptive = false;
  std::size_t iterations = 0;
  std::size_t restarts_used = 0;
  std::size_t evaluations = 0;
  /// Index of the start that produced the optimum.
  std::size_t best_start = 0;
  /// Objective after each adaptive stage (initial, alpha-step, beta-step); empty otherwise.
  std::vector<double> stage_objectives;
};

struct InitialBeta {
  std::vector<double> beta;
  double objective = 0.0;
  bool converged = false;
  bool at_boundary = false;
};

namespace detail {

struct MultiStartOutcome {
  opt::PolishResult best;
  std::size_t best_start = 0;
  std::size_t evaluations = 0;
  std::size_t nm_iterations = 0;
};

/// Nelder-Mead from every start, then BFGS polish of the best simplex result.
/// Ties on the objective go to the lowest start index.
inline MultiStartOutcome multistart(const opt::Objective& f, const opt::Bounds& bounds,
                                    const std::vector<Eigen::VectorXd>& starts, const EstimateOptions& opts) {
  MultiStartOutcome out;
  opt::LocalResult best_nm;
  bool have = false;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    auto r = opt::nelder_mead(f, starts[s], bounds, opts.nelder_mead);
    out.evaluations += r.evaluations;
    if (!std::isfinite(r.f)) continue;
    if (!have || r.f < best_nm.f) {
      best_nm = std::move(r);
      out.best_start = s;
      have = true;
    }
  }
  if (!have) {
    throw EstimationError("objective non-finite from all " + std::to_string(starts.size()) + " starts");
  }
  out.nm_iterations = best_nm.iterations;
  out.best = opt::bfgs_polish(f, best_nm.x, bounds, opts.polish);
  out.evaluations += out.best.evaluations;
  if (!std::isfinite(out.best.f) || out.best.f > best_nm.f) {
    // Polish never worsens the simplex optimum.
    out.best.x = best_nm.x;
    out.best.f = best_nm.f;
  }
  return out;
}

inline opt::Bounds sub_bounds(const ParamBox& box, std::size_t first, std::size_t count) {
  opt::Bounds b{Eigen::VectorXd(static_cast<Eigen::Index>(count)), Eigen::VectorXd(static_cast<Eigen::Index>(count))};
  for (std::size_t j = 0; j < count; ++j) {
    b.lower[static_cast<Eigen::Index>(j)] = box.lower(first + j);
    b.upper[static_cast<Eigen::Index>(j)] = box.upper(first + j);
  }
  return b;
}

inline std::vector<Eigen::VectorXd> default_starts(const opt::Bounds& bounds, std::size_t count,
                                                   const Eigen::VectorXd* heuristic) {
  std::vector<Eigen::VectorXd> starts;
  if (count == 0) return starts;
  starts.push_back(bounds.center());
  if (heuristic != nullptr && starts.size() < count) starts.push_back(*heuristic);
  if (starts.size() < count) {
    for (auto& p : opt::halton_points(bounds, count - starts.size())) starts.push_back(std::move(p));
  }
  return starts;
}

inline bool on_boundary(const Eigen::VectorXd& x, const opt::Bounds& b) {
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] <= b.lower[j] || x[j] >= b.upper[j]) return true;
  }
  return false;
}

/// Quadratic-variation contrast for the diffusion block alone.
inline double beta_contrast(const QLContext& ctx, const ParamVector& theta) {
  const auto& x = ctx.path().values();
  const double delta = ctx.delta();
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double c = ctx.model().diffsq(theta, x[i - 1]);
    if (!(c > 0.0)) return std::numeric_limits<double>::infinity();
    const double dx = x[i] - x[i - 1];
    sum += dx * dx / (delta * c) + std::log(c);
  }
  return 0.5 * sum;
}

}  // namespace detail

/// Minimizer of the drift-free contrast sum{(dX)^2 / (Delta c) + log c} / 2 over the beta box.
inline InitialBeta initial_beta(const QLContext& ctx, const EstimateOptions& opts = {}) {
  const Model& model = ctx.model();
  const auto center = model.box.center();
  ParamVector theta = ParamVector::from_flat(center, model.m1);
  const auto bounds = detail::sub_bounds(model.box, model.m1, model.m2);
  opt::Objective f = [&](const Eigen::VectorXd& b) {
    ParamVector t = theta;
    for (std::size_t j = 0; j < model.m2; ++j) t.beta[j] = b[static_cast<Eigen::Index>(j)];
    return detail::beta_contrast(ctx, t);
  };
  const auto starts = detail::default_starts(bounds, std::max<std::size_t>(opts.starts, 1), nullptr);
  const auto out = detail::multistart(f, bounds, starts, opts);
  InitialBeta res;
  res.beta.assign(out.best.x.data(), out.best.x.data() + out.best.x.size());
  res.objective = out.best.f;
  res.at_boundary = detail::on_boundary(out.best.x, bounds);
  res.converged = out.best.converged && !res.at_boundary;
  return res;
}

/// Maximum quasi-likelihood estimator: multi-start minimization of ql_total over the box.
inline FitResult mqle(const QLContext& ctx, const EstimateOptions& opts = {}) {
  const Model& model = ctx.model();
  require(ctx.n() + 1 >= model.dim() + 2, "mqle: path too short for the number of parameters");
  const ParamBox& box = model.box;
  opt::Bounds bounds{Eigen::Map<const Eigen::VectorXd>(box.lower().data(), static_cast<Eigen::Index>(box.size())),
                     Eigen::Map<const Eigen::VectorXd>(box.upper().data(), static_cast<Eigen::Index>(box.size()))};
  const std::size_t m1 = model.m1;
  opt::Objective f = [&](const Eigen::VectorXd& x) { return ql_total(ctx, detail::from_eigen(x, m1)); };

  std::vector<Eigen::VectorXd> starts;
  if (opts.starts > 0) {
    // Heuristic start: drift block at the box center, diffusion block from quadratic variation.
    Eigen::VectorXd heuristic = bounds.center();
    if (opts.starts > 1) {
      EstimateOptions beta_opts = opts;
      beta_opts.starts = 1;
      const auto ib = initial_beta(ctx, beta_opts);
      for (std::size_t j = 0; j < model.m2; ++j) heuristic[static_cast<Eigen::Index>(m1 + j)] = ib.beta[j];
    }
    starts = detail::default_starts(bounds, opts.starts, &heuristic);
  }
  for (const auto& extra : opts.extra_starts) {
    model.check_theta(extra);
    starts.push_back(detail::to_eigen(extra));
  }
  require(!starts.empty(), "mqle: no starting points");

  const auto out = detail::multistart(f, bounds, starts, opts);
  FitResult res;
  res.theta_hat = detail::from_eigen(out.best.x, m1);
  res.objective = out.best.f;
  res.at_boundary = detail::on_boundary(out.best.x, bounds);
  res.converged = out.best.converged && !res.at_boundary;
  res.iterations = out.nm_iterations + out.best.iterations;
  res.restarts_used = starts.size();
  res.evaluations = out.evaluations;
  res.best_start = out.best_start;
  return res;
}

/**
 * First-type adaptive estimator for p = 2: start from initial_beta, minimize the
 * contrast over alpha with beta fixed, then over beta with alpha fixed.
 *
 * Both stages include the previous stage's value among their starts, so the
 * recorded stage objectives are non-increasing.
 */
inline FitResult adaptive_estimate(const QLContext& ctx, const EstimateOptions& opts = {}) {
  const Model& model = ctx.model();
  require(ctx.n() + 1 >= model.dim() + 2, "adaptive_estimate: path too short for the number of parameters");
  const std::size_t m1 = model.m1;
  const std::size_t m2 = model.m2;
  const auto ib = initial_beta(ctx, opts);

  ParamVector theta = ParamVector::from_flat(model.box.center(), m1);
  theta.beta = ib.beta;
  FitResult res;
  res.adaptive = true;
  res.stage_objectives.push_back(ql_total(ctx, theta));

  // alpha-step
  const auto a_bounds = detail::sub_bounds(model.box, 0, m1);
  opt::Objective fa = [&](const Eigen::VectorXd& a) {
    ParamVector t = theta;
    for (std::size_t j = 0; j < m1; ++j) t.alpha[j] = a[static_cast<Eigen::Index>(j)];
    return ql_total(ctx, t);
  };
  const auto a_starts = detail::default_starts(a_bounds, std::max<std::size_t>(opts.starts, 1), nullptr);
  detail::MultiStartOutcome a_out;
  try {
    a_out = detail::multistart(fa, a_bounds, a_starts, opts);
  } catch (const EstimationError& e) {
    throw EstimationError("adaptive alpha-step: " + e.diagnostics());
  }
  for (std::size_t j = 0; j < m1; ++j) theta.alpha[j] = a_out.best.x[static_cast<Eigen::Index>(j)];
  res.stage_objectives.push_back(a_out.best.f);

  // beta-step, seeded at the initial beta
  const auto b_bounds = detail::sub_bounds(model.box, m1, m2);
  opt::Objective fb = [&](const Eigen::VectorXd& b) {
    ParamVector t = theta;
    for (std::size_t j = 0; j < m2; ++j) t.beta[j] = b[static_cast<Eigen::Index>(j)];
    return ql_total(ctx, t);
  };
  Eigen::VectorXd seeded(static_cast<Eigen::Index>(m2));
  for (std::size_t j = 0; j < m2; ++j) seeded[static_cast<Eigen::Index>(j)] = ib.beta[j];
  auto b_starts = detail::default_starts(b_bounds, std::max<std::size_t>(opts.starts, 1), &seeded);
  detail::MultiStartOutcome b_out;
  try {
    b_out = detail::multistart(fb, b_bounds, b_starts, opts);
  } catch (const EstimationError& e) {
    throw EstimationError("adaptive beta-step: " + e.diagnostics());
  }
  for (std::size_t j = 0; j < m2; ++j) theta.beta[j] = b_out.best.x[static_cast<Eigen::Index>(j)];
  res.stage_objectives.push_back(b_out.best.f);

  res.theta_hat = theta;
  res.objective = b_out.best.f;
  res.at_boundary = detail::on_boundary(a_out.best.x, a_bounds) || detail::on_boundary(b_out.best.x, b_bounds);
  res.converged = a_out.best.converged && b_out.best.converged && !res.at_boundary;
  res.iterations = a_out.nm_iterations + a_out.best.iterations + b_out.nm_iterations + b_out.best.iterations;
  res.restarts_used = a_starts.size() + b_starts.size();
  res.evaluations = a_out.evaluations + b_out.evaluations;
  return res;
}

/// Alpha-step of the adaptive estimator alone: minimize over alpha at a fixed beta.
inline std::vector<double> adaptive_alpha_step(const QLContext& ctx, const std::vector<double>& beta,
                                               const EstimateOptions& opts = {}) {
  const Model& model = ctx.model();
  require(beta.size() == model.m2, "adaptive_alpha_step: beta has the wrong size");
  ParamVector theta = ParamVector::from_flat(model.box.center(), model.m1);
  theta.beta = beta;
  const auto bounds = detail::sub_bounds(model.box, 0, model.m1);
  opt::Objective fa = [&](const Eigen::VectorXd& a) {
    ParamVector t = theta;
    for (std::size_t j = 0; j < model.m1; ++j) t.alpha[j] = a[static_cast<Eigen::Index>(j)];
    return ql_total(ctx, t);
  };
  const auto starts = detail::default_starts(bounds, std::max<std::size_t>(opts.starts, 1), nullptr);
  const auto out = detail::multistart(fa, bounds, starts, opts);
  return {out.best.x.data(), out.best.x.data() + out.best.x.size()};
}

}  // namespace sdetest
