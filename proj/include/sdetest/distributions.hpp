#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "sdetest/error.hpp"

namespace sdetest {

struct Chi2Params {
  int df = 1;
  double noncentrality = 0.0;
};

namespace detail {

/// Regularized lower incomplete gamma P(a, x): series below a + 1, Lentz continued fraction above.
inline double regularized_gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    for (int k = 1; k < 10000; ++k) {
      term *= x / (a + k);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return std::min(1.0, sum * std::exp(log_prefix));
  }
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int k = 1; k < 10000; ++k) {
    const double an = -k * (k - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

inline double chi2_log_pdf(double x, int df) {
  const double k = 0.5 * df;
  return (k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) - std::lgamma(k);
}

}  // namespace detail

/// Central chi-square distribution function.
inline double chi2_cdf(double x, int df) {
  require(df >= 1, "chi2_cdf: df must be at least 1");
  require(x >= 0.0 && !std::isnan(x), "chi2_cdf: x must be nonnegative");
  if (std::isinf(x)) return 1.0;
  return detail::regularized_gamma_p(0.5 * df, 0.5 * x);
}

/// Inverse of chi2_cdf by bisection, finished with Newton steps.
inline double chi2_quantile(double p, int df) {
  require(df >= 1, "chi2_quantile: df must be at least 1");
  require(p > 0.0 && p < 1.0, "chi2_quantile: p must lie in (0, 1)");
  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(df));
  while (chi2_cdf(hi, df) < p) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, df) < p ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 8; ++it) {
    const double err = chi2_cdf(x, df) - p;
    if (std::abs(err) < 1e-15) break;
    const double step = err / std::exp(detail::chi2_log_pdf(x, df));
    const double next = x - step;
    if (!(next > lo && next < hi) || !std::isfinite(next)) break;
    x = next;
    if (std::abs(step) < 1e-15 * x) break;
  }
  return x;
}

struct NoncentralChi2Result {
  double value = 0.0;
  /// Index of the last Poisson term included in the series.
  std::size_t truncation_index = 0;
};

/// Noncentral chi-square distribution function as a Poisson mixture of central
/// ones, truncated once the remaining Poisson mass is below `tail_tol`.
inline NoncentralChi2Result noncentral_chi2_cdf_detail(double x, int df, double lambda, double tail_tol = 1e-12) {
  require(df >= 1, "noncentral_chi2_cdf: df must be at least 1");
  require(x >= 0.0 && !std::isnan(x), "noncentral_chi2_cdf: x must be nonnegative");
  require(lambda >= 0.0 && lambda <= 1e6, "noncentral_chi2_cdf: noncentrality must lie in [0, 1e6]");
  NoncentralChi2Result out;
  if (lambda == 0.0) {
    out.value = chi2_cdf(x, df);
    return out;
  }
  const double mu = 0.5 * lambda;
  const double log_mu = std::log(mu);
  double mass = 0.0;
  double sum = 0.0;
  for (std::size_t j = 0;; ++j) {
    const double jd = static_cast<double>(j);
    const double w = std::exp(-mu + jd * log_mu - std::lgamma(jd + 1.0));
    mass += w;
    if (w > 0.0) sum += w * chi2_cdf(x, df + 2 * static_cast<int>(j));
    out.truncation_index = j;
    if (jd > mu && 1.0 - mass < tail_tol) break;
    if (j > 10'000'000) break;
  }
  out.value = std::clamp(sum, 0.0, 1.0);
  return out;
}

inline double noncentral_chi2_cdf(double x, int df, double lambda) {
  return noncentral_chi2_cdf_detail(x, df, lambda).value;
}

}  // namespace sdetest
