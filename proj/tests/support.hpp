#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "sdetest/sdetest.hpp"

namespace testing_support {

inline sdetest::ParamVector ou_theta0() { return {{0.5, 0.5}, {0.25}}; }
inline sdetest::ParamVector cir_theta0() { return {{0.5, 0.5}, {0.125}}; }

inline sdetest::SamplePath simulate(const sdetest::Model& model, const sdetest::ParamVector& theta, std::size_t n,
                                    std::uint64_t seed, double delta = 0.0) {
  const double d = delta > 0.0 ? delta : sdetest::observation_schedule(n).delta;
  return sdetest::euler_maruyama(model, theta, sdetest::SimConfig{n, d, 30, 1.0, seed});
}

inline sdetest::QLContext ou_context(std::size_t n, std::uint64_t seed, double delta = 0.0) {
  const auto model = sdetest::make_ou();
  return sdetest::QLContext(model, simulate(model, ou_theta0(), n, seed, delta));
}

/// Model with b = 0 and constant c = s^2 on the real line.
inline sdetest::Model driftless_model() {
  sdetest::Model m;
  m.name = "driftless";
  m.m1 = 1;
  m.m2 = 1;
  m.box = sdetest::ParamBox({-5.0, 0.05}, {5.0, 5.0});
  m.state_domain = sdetest::StateDomain::real_line();
  m.drift = [](const sdetest::ParamVector&, double) { return 0.0; };
  m.diff = [](const sdetest::ParamVector& t, double) { return t.beta[0]; };
  m.drift_dx = [](const sdetest::ParamVector&, double) { return 0.0; };
  m.diffsq_dx = [](const sdetest::ParamVector&, double) { return 0.0; };
  m.diffsq_dxx = [](const sdetest::ParamVector&, double) { return 0.0; };
  return m;
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
template <class Cdf>
double ks_distance(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace testing_support
