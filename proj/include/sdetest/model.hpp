#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "sdetest/error.hpp"
#include "sdetest/params.hpp"

namespace sdetest {

/// Interval of admissible states. Open ends exclude the endpoint.
struct StateDomain {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool lower_open = true;
  bool upper_open = true;

  static StateDomain real_line() { return {}; }
  static StateDomain positive() { return {0.0, std::numeric_limits<double>::infinity(), true, true}; }

  bool contains(double x) const noexcept {
    if (!std::isfinite(x)) return false;
    const bool lo_ok = lower_open ? x > lower : x >= lower;
    const bool hi_ok = upper_open ? x < upper : x <= upper;
    return lo_ok && hi_ok;
  }

  /// Nearest point of the closure; used to keep diffusion arguments admissible.
  double clamp(double x) const noexcept { return std::fmin(std::fmax(x, lower), upper); }
};

/// Closed-form stationary law, when the model has one.
struct InvariantLaw {
  enum class Kind { gaussian, gamma };
  Kind kind;
  double first;   // mean (gaussian) or shape (gamma)
  double second;  // variance (gaussian) or scale (gamma)

  double mean() const noexcept { return kind == Kind::gaussian ? first : first * second; }
  double variance() const noexcept { return kind == Kind::gaussian ? second : first * second * second; }
};

/// Drift, diffusion and spatial derivatives at one state.
struct LocalCoefficients {
  double b;     // drift
  double b_x;   // d drift / dx
  double c;     // squared diffusion
  double c_x;   // dc/dx
  double c_xx;  // d2c/dx2
};

using ScalarField = std::function<double(const ParamVector&, double)>;

/**
 * One-dimensional parametric diffusion dX = b(alpha, X) dt + sigma(beta, X) dW.
 *
 * The author of a model supplies sigma and exact spatial derivatives of b and
 * c = sigma^2. Parameter derivatives are never required. `coefficients` is an
 * optional fused evaluator; when empty it is assembled from the individual
 * callbacks.
 */
struct Model {
  std::string name;
  std::size_t m1 = 0;
  std::size_t m2 = 0;
  ScalarField drift;
  ScalarField diff;
  ScalarField drift_dx;
  ScalarField diffsq_dx;
  ScalarField diffsq_dxx;
  StateDomain state_domain;
  ParamBox box;
  std::function<InvariantLaw(const ParamVector&)> invariant_law;
  std::function<LocalCoefficients(const ParamVector&, double)> coefficients;

  std::size_t dim() const noexcept { return m1 + m2; }

  double diffsq(const ParamVector& theta, double x) const {
    const double s = diff(theta, x);
    return s * s;
  }

  LocalCoefficients local(const ParamVector& theta, double x) const {
    if (coefficients) return coefficients(theta, x);
    const double s = diff(theta, x);
    return {drift(theta, x), drift_dx(theta, x), s * s, diffsq_dx(theta, x), diffsq_dxx(theta, x)};
  }

  void check_state(double x) const {
    if (!state_domain.contains(x)) {
      throw Error(ErrorCode::domain, name + ": state " + std::to_string(x) + " outside the state domain");
    }
  }

  void check_theta(const ParamVector& theta) const {
    require(theta.m1() == m1 && theta.m2() == m2, name + ": parameter block sizes do not match the model");
  }
};

namespace detail {

inline double gamma2(const LocalCoefficients& k) noexcept {
  return 0.5 * (k.b * k.c_x + 2.0 * k.c * k.b_x) + 0.25 * k.c * k.c_xx;
}

}  // namespace detail

/// Coefficient of Delta^2 in the conditional-variance expansion.
inline double gamma2(const Model& model, const ParamVector& theta, double x) {
  model.check_theta(theta);
  model.check_state(x);
  return detail::gamma2(model.local(theta, x));
}

inline double correction_d1(const Model& model, const ParamVector& theta, double x) {
  model.check_theta(theta);
  model.check_state(x);
  const auto k = model.local(theta, x);
  return -detail::gamma2(k) / k.c;
}

inline double correction_e1(const Model& model, const ParamVector& theta, double x) {
  return -correction_d1(model, theta, x);
}

/// First-order conditional mean x + delta * b(alpha, x).
inline double mean_expansion_r1(const Model& model, const ParamVector& theta, double x, double delta) {
  require(delta >= 0.0, "mean_expansion_r1: delta must be nonnegative");
  return x + delta * model.drift(theta, x);
}

inline ParamBox default_box() { return ParamBox::uniform(3, 0.01, 5.0); }

namespace detail {

inline void check_builtin_box(const ParamBox& box, const char* who) {
  require(box.size() == 3, std::string(who) + ": box must have dimension 3 (m1 = 2, m2 = 1)");
  require(box.lower(2) > 0.0, std::string(who) + ": diffusion parameter lower bound must be positive");
}

}  // namespace detail

/// dX = a1 (a2 - X) dt + b1 dW on the real line.
inline Model make_ou(const ParamBox& box = default_box()) {
  detail::check_builtin_box(box, "make_ou");
  Model m;
  m.name = "ou";
  m.m1 = 2;
  m.m2 = 1;
  m.box = box;
  m.state_domain = StateDomain::real_line();
  m.drift = [](const ParamVector& t, double x) { return t.alpha[0] * (t.alpha[1] - x); };
  m.diff = [](const ParamVector& t, double) { return t.beta[0]; };
  m.drift_dx = [](const ParamVector& t, double) { return -t.alpha[0]; };
  m.diffsq_dx = [](const ParamVector&, double) { return 0.0; };
  m.diffsq_dxx = [](const ParamVector&, double) { return 0.0; };
  m.coefficients = [](const ParamVector& t, double x) {
    const double a1 = t.alpha[0];
    const double b1 = t.beta[0];
    return LocalCoefficients{a1 * (t.alpha[1] - x), -a1, b1 * b1, 0.0, 0.0};
  };
  m.invariant_law = [](const ParamVector& t) {
    const double b1 = t.beta[0];
    return InvariantLaw{InvariantLaw::Kind::gaussian, t.alpha[1], b1 * b1 / (2.0 * t.alpha[0])};
  };
  return m;
}

/// dX = a1 (a2 - X) dt + b1 sqrt(X) dW on the positive half-line.
inline Model make_cir(const ParamBox& box = default_box()) {
  detail::check_builtin_box(box, "make_cir");
  Model m;
  m.name = "cir";
  m.m1 = 2;
  m.m2 = 1;
  m.box = box;
  m.state_domain = StateDomain::positive();
  m.drift = [](const ParamVector& t, double x) { return t.alpha[0] * (t.alpha[1] - x); };
  m.diff = [](const ParamVector& t, double x) { return t.beta[0] * std::sqrt(x); };
  m.drift_dx = [](const ParamVector& t, double) { return -t.alpha[0]; };
  m.diffsq_dx = [](const ParamVector& t, double) { return t.beta[0] * t.beta[0]; };
  m.diffsq_dxx = [](const ParamVector&, double) { return 0.0; };
  m.coefficients = [](const ParamVector& t, double x) {
    const double a1 = t.alpha[0];
    const double b2 = t.beta[0] * t.beta[0];
    return LocalCoefficients{a1 * (t.alpha[1] - x), -a1, b2 * x, b2, 0.0};
  };
  m.invariant_law = [](const ParamVector& t) {
    const double b2 = t.beta[0] * t.beta[0];
    const double a1 = t.alpha[0];
    return InvariantLaw{InvariantLaw::Kind::gamma, 2.0 * a1 * t.alpha[1] / b2, b2 / (2.0 * a1)};
  };
  return m;
}

/// Looks up a built-in model by identifier ("ou" or "cir").
inline Model make_model(const std::string& id, const ParamBox& box = default_box()) {
  if (id == "ou" || id == "OU") return make_ou(box);
  if (id == "cir" || id == "CIR") return make_cir(box);
  throw Error(ErrorCode::invalid_argument, "unknown model id '" + id + "' (expected ou or cir)");
}

}  // namespace sdetest
