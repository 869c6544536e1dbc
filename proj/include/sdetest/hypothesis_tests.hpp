#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sdetest/distributions.hpp"
#include "sdetest/error.hpp"
#include "sdetest/format.hpp"
#include "sdetest/params.hpp"
#include "sdetest/quasi_likelihood.hpp"

namespace sdetest {

enum class StatKind { T, GQLRT, WALD, RAO, AKL, BS, STEP_BETA, STEP_ALPHA };

inline constexpr std::array<StatKind, 8> kAllStatKinds = {StatKind::T,   StatKind::GQLRT, StatKind::WALD,
                                                          StatKind::RAO, StatKind::AKL,   StatKind::BS,
                                                          StatKind::STEP_BETA, StatKind::STEP_ALPHA};

inline std::string to_string(StatKind kind) {
  switch (kind) {
    case StatKind::T: return "T";
    case StatKind::GQLRT: return "GQLRT";
    case StatKind::WALD: return "WALD";
    case StatKind::RAO: return "RAO";
    case StatKind::AKL: return "AKL";
    case StatKind::BS: return "BS";
    case StatKind::STEP_BETA: return "STEP_BETA";
    case StatKind::STEP_ALPHA: return "STEP_ALPHA";
  }
  return "?";
}

/// Case-insensitive inverse of to_string.
inline StatKind parse_stat_kind(std::string_view text) {
  std::string upper;
  for (char ch : trim(text)) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (StatKind k : kAllStatKinds) {
    if (to_string(k) == upper) return k;
  }
  throw Error(ErrorCode::invalid_argument, "unknown statistic '" + std::string(text) + "'");
}

enum class ThresholdMode { asymptotic, empirical };

inline std::string to_string(ThresholdMode m) { return m == ThresholdMode::asymptotic ? "asymptotic" : "empirical"; }

inline ThresholdMode parse_threshold_mode(std::string_view s) {
  if (trim(s) == "asymptotic") return ThresholdMode::asymptotic;
  if (trim(s) == "empirical") return ThresholdMode::empirical;
  throw Error(ErrorCode::invalid_argument, "threshold mode must be 'asymptotic' or 'empirical'");
}

/// Where the rejection threshold comes from.
struct Calibration {
  ThresholdMode mode = ThresholdMode::asymptotic;
  double level = 0.05;
  double threshold = std::numeric_limits<double>::quiet_NaN();  // empirical mode only

  static Calibration asymptotic(double level) { return {ThresholdMode::asymptotic, level, std::nan("")}; }
  static Calibration empirical(double threshold, double level = 0.05) {
    return {ThresholdMode::empirical, level, threshold};
  }
};

struct TestReport {
  StatKind kind = StatKind::T;
  double statistic = 0.0;
  int df = 1;
  double threshold = 0.0;
  /// Asymptotic chi-square p-value; NaN for BS, which has no asymptotic calibration here.
  double p_value = 1.0;
  bool reject = false;
  ParamVector theta_hat;
  ParamVector theta_null;
  std::size_t n = 0;
  double delta = 0.0;
  /// Number of per-observation ratios clipped at the overflow cap (phi-divergences only).
  std::size_t saturated = 0;
};

namespace detail {

inline TestReport make_report(StatKind kind, double statistic, int df, const Calibration& cal, const QLContext& ctx,
                              const ParamVector& theta_hat, const ParamVector& theta_null) {
  TestReport r;
  r.kind = kind;
  r.statistic = statistic;
  r.df = df;
  r.theta_hat = theta_hat;
  r.theta_null = theta_null;
  r.n = ctx.n();
  r.delta = ctx.delta();
  if (cal.mode == ThresholdMode::asymptotic) {
    if (kind == StatKind::BS) {
      throw Error(ErrorCode::invalid_argument, "BS has no asymptotic calibration; supply an empirical threshold");
    }
    require(cal.level > 0.0 && cal.level < 1.0, "calibration level must lie in (0, 1)");
    r.threshold = chi2_quantile(1.0 - cal.level, df);
  } else {
    require(!std::isnan(cal.threshold), "empirical calibration needs a threshold");
    r.threshold = cal.threshold;
  }
  if (kind == StatKind::BS || std::isnan(statistic)) {
    r.p_value = std::nan("");
  } else {
    r.p_value = 1.0 - chi2_cdf(std::max(statistic, 0.0), df);
  }
  r.reject = statistic > r.threshold;
  return r;
}

inline int full_df(const QLContext& ctx) { return static_cast<int>(ctx.model().dim()); }

/// diag(sqrt(n Delta) for alpha, sqrt(n) for beta).
inline Eigen::VectorXd inverse_rates(const QLContext& ctx) {
  const auto m1 = static_cast<Eigen::Index>(ctx.model().m1);
  const auto m = static_cast<Eigen::Index>(ctx.model().dim());
  const double n = static_cast<double>(ctx.n());
  Eigen::VectorXd r(m);
  r.head(m1).setConstant(std::sqrt(n * ctx.delta()));
  r.tail(m - m1).setConstant(std::sqrt(n));
  return r;
}

}  // namespace detail

/// Mean squared difference of the per-observation contrast terms.
inline double empirical_l2_distance(const QLContext& ctx, const ParamVector& theta1, const ParamVector& theta2) {
  const auto a = ql_terms(ctx, theta1);
  const auto b = ql_terms(ctx, theta2);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

/// n times the empirical L2 distance between the fitted and hypothesised contrasts.
inline TestReport t_statistic(const QLContext& ctx, const ParamVector& theta_hat, const ParamVector& theta_null,
                              const Calibration& cal = {}) {
  const double stat = static_cast<double>(ctx.n()) * empirical_l2_distance(ctx, theta_hat, theta_null);
  return detail::make_report(StatKind::T, stat, detail::full_df(ctx), cal, ctx, theta_hat, theta_null);
}

/// Quasi-likelihood ratio 2 (l(theta_null) - l(theta_hat)); nonnegative when theta_hat minimizes l.
inline TestReport gqlrt_statistic(const QLContext& ctx, const ParamVector& theta_hat, const ParamVector& theta_null,
                                  const Calibration& cal = {}) {
  const double stat = 2.0 * (ql_total(ctx, theta_null) - ql_total(ctx, theta_hat));
  return detail::make_report(StatKind::GQLRT, stat, detail::full_df(ctx), cal, ctx, theta_hat, theta_null);
}

inline TestReport wald_statistic(const QLContext& ctx, const ParamVector& theta_hat, const ParamVector& theta_null,
                                 const Calibration& cal = {}) {
  ctx.model().check_theta(theta_null);
  const InfoMatrix info = observed_info(ctx, theta_hat, BoundaryPolicy::pull_inside);
  if (!info.full().allFinite()) throw Error(ErrorCode::estimation, "wald: observed information is not finite");
  const Eigen::VectorXd u =
      detail::inverse_rates(ctx).cwiseProduct(detail::to_eigen(theta_hat) - detail::to_eigen(theta_null));
  const double stat = info.quadratic_form(u);
  return detail::make_report(StatKind::WALD, stat, detail::full_df(ctx), cal, ctx, theta_hat, theta_null);
}

inline constexpr double kRaoConditionLimit = 1e12;

/// Score statistic at theta_null, weighted by the inverse observed information at theta_hat.
inline TestReport rao_statistic(const QLContext& ctx, const ParamVector& theta_hat, const ParamVector& theta_null,
                                const Calibration& cal = {}) {
  const InfoMatrix info = observed_info(ctx, theta_hat, BoundaryPolicy::pull_inside);
  if (!info.full().allFinite()) throw Error(ErrorCode::rao_undefined, "rao: observed information is not finite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info.full(), Eigen::EigenvaluesOnly);
  const double big = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double small = eig.eigenvalues().cwiseAbs().minCoeff();
  if (!(small > 0.0) || big / small >= kRaoConditionLimit) {
    throw Error(ErrorCode::rao_undefined, "rao: observed information is singular (condition number >= 1e12)");
  }
  const Eigen::VectorXd score = ql_grad(ctx, theta_null);
  const Eigen::VectorXd v = score.cwiseQuotient(detail::inverse_rates(ctx));
  const double stat = v.dot(info.full().fullPivLu().solve(v));
  return detail::make_report(StatKind::RAO, stat, detail::full_df(ctx), cal, ctx, theta_hat, theta_null);
}

enum class PhiKind { AKL, BS };

/// Largest log-ratio used before a per-observation ratio is clipped.
inline constexpr double kDefaultLogRatioCap = 700.0;

/**
 * 2 * sum_i phi(r_i) with r_i = exp(l_i(theta_null) - l_i(theta_hat)), the
 * per-observation quasi-likelihood ratio of the fit against the null.
 *
 * AKL: phi(r) = 1 - r + r log r. BS: phi(r) = ((r - 1)/(r + 1))^2 = tanh^2(log r / 2).
 */
inline TestReport phi_divergence_statistic(const QLContext& ctx, const ParamVector& theta_hat,
                                           const ParamVector& theta_null, PhiKind phi, const Calibration& cal = {},
                                           double log_ratio_cap = kDefaultLogRatioCap) {
  const auto fit = ql_terms(ctx, theta_hat);
  const auto null = ql_terms(ctx, theta_null);
  double sum = 0.0;
  std::size_t saturated = 0;
  for (std::size_t i = 0; i < fit.size(); ++i) {
    double log_r = null[i] - fit[i];
    if (phi == PhiKind::AKL) {
      if (log_r > log_ratio_cap) {
        log_r = log_ratio_cap;
        ++saturated;
      }
      const double r = std::exp(log_r);
      sum += 1.0 - r + r * log_r;
    } else {
      const double t = std::tanh(0.5 * log_r);
      sum += t * t;
    }
  }
  const StatKind kind = phi == PhiKind::AKL ? StatKind::AKL : StatKind::BS;
  auto report = detail::make_report(kind, 2.0 * sum, detail::full_df(ctx), cal, ctx, theta_hat, theta_null);
  report.saturated = saturated;
  return report;
}

/**
 * Diffusion-block stepwise statistic
 *   sum_i [ ((dX_i)^2 / Delta (1/c(beta_tilde) - 1/c(beta_0)) + log(c(beta_tilde)/c(beta_0))) / 2 ]^2,
 * the squared per-increment difference of the drift-free contrast. df = m2.
 */
inline TestReport stepwise_beta(const QLContext& ctx, const std::vector<double>& beta_tilde,
                                const std::vector<double>& beta_null, const Calibration& cal = {}) {
  const Model& model = ctx.model();
  require(beta_tilde.size() == model.m2 && beta_null.size() == model.m2, "stepwise_beta: beta has the wrong size");
  ParamVector t_tilde = ParamVector::from_flat(model.box.center(), model.m1);
  ParamVector t_null = t_tilde;
  t_tilde.beta = beta_tilde;
  t_null.beta = beta_null;
  const auto& x = ctx.path().values();
  const double delta = ctx.delta();
  double stat = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double c_tilde = model.diffsq(t_tilde, x[i - 1]);
    const double c_null = model.diffsq(t_null, x[i - 1]);
    const double dx = x[i] - x[i - 1];
    const double term = 0.5 * (dx * dx / delta * (1.0 / c_tilde - 1.0 / c_null) + std::log(c_tilde / c_null));
    stat += term * term;
  }
  return detail::make_report(StatKind::STEP_BETA, stat, static_cast<int>(model.m2), cal, ctx, t_tilde, t_null);
}

/// Drift-block stepwise statistic sum_i [l_i(alpha_tilde, beta_tilde) - l_i(alpha_0, beta_tilde)]^2. df = m1.
inline TestReport stepwise_alpha(const QLContext& ctx, const std::vector<double>& alpha_tilde,
                                 const std::vector<double>& alpha_null, const std::vector<double>& beta_tilde,
                                 const Calibration& cal = {}) {
  const Model& model = ctx.model();
  const ParamVector fit(alpha_tilde, beta_tilde);
  const ParamVector null(alpha_null, beta_tilde);
  model.check_theta(fit);
  model.check_theta(null);
  const double stat = static_cast<double>(ctx.n()) * empirical_l2_distance(ctx, fit, null);
  return detail::make_report(StatKind::STEP_ALPHA, stat, static_cast<int>(model.m1), cal, ctx, fit, null);
}

struct PowerApproximation {
  double power = 0.0;
  double noncentrality = 0.0;
  /// Set when a slightly negative quadratic form was clipped to zero.
  bool clipped = false;
};

/// Asymptotic power 1 - F(q; df, h' I h) at the (1 - level) central quantile q.
inline PowerApproximation power_approximation(const Eigen::VectorXd& h, const InfoMatrix& info, double level,
                                              int df) {
  require(level > 0.0 && level < 1.0, "power_approximation: level must lie in (0, 1)");
  require(h.size() == info.full().rows(), "power_approximation: h has the wrong dimension");
  PowerApproximation out;
  double lambda = info.quadratic_form(h);
  if (lambda < 0.0) {
    lambda = 0.0;
    out.clipped = true;
  }
  out.noncentrality = lambda;
  if (lambda == 0.0) {
    out.power = level;
    return out;
  }
  const double q = chi2_quantile(1.0 - level, df);
  out.power = std::clamp(1.0 - noncentral_chi2_cdf(q, df, lambda), 0.0, 1.0);
  return out;
}

inline std::string test_report_csv_header() { return "kind,n,delta,statistic,df,threshold,p_value,reject"; }

inline std::string test_report_csv_row(const TestReport& r) {
  return to_string(r.kind) + ',' + std::to_string(r.n) + ',' + format_double(r.delta) + ',' +
         format_double(r.statistic) + ',' + std::to_string(r.df) + ',' + format_double(r.threshold) + ',' +
         format_double(r.p_value) + ',' + (r.reject ? "true" : "false");
}

}  // namespace sdetest
