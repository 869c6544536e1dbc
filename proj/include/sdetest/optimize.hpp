#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "sdetest/error.hpp"

namespace sdetest::opt {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index size() const noexcept { return lower.size(); }
  Eigen::VectorXd project(Eigen::VectorXd x) const { return x.cwiseMax(lower).cwiseMin(upper); }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
  Eigen::VectorXd width() const { return upper - lower; }
};

struct LocalResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

/// Non-finite objective values are treated as +infinity so they are never accepted.
inline double safe_eval(const Objective& f, const Eigen::VectorXd& x, std::size_t& counter) {
  ++counter;
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace detail

struct NelderMeadOptions {
  double initial_step = 0.10;  // fraction of the box width
  double ftol = 1e-8;          // relative spread of simplex values
  double xtol = 1e-7;          // simplex diameter relative to box width
  std::size_t max_evaluations = 1500;
};

/// Nelder-Mead with every trial point projected onto the box.
inline LocalResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Bounds& bounds,
                               const NelderMeadOptions& opts = {}) {
  const Eigen::Index m = x0.size();
  require(m >= 1 && bounds.size() == m, "nelder_mead: dimension mismatch");
  const Eigen::VectorXd width = bounds.width();

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(m + 1));
  std::vector<double> vals(static_cast<std::size_t>(m + 1));
  LocalResult res;
  pts[0] = bounds.project(x0);
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd p = pts[0];
    const double step = opts.initial_step * width[j];
    p[j] = (p[j] + step <= bounds.upper[j]) ? p[j] + step : p[j] - step;
    pts[static_cast<std::size_t>(j + 1)] = bounds.project(p);
  }
  for (std::size_t k = 0; k < pts.size(); ++k) vals[k] = detail::safe_eval(f, pts[k], res.evaluations);

  std::vector<std::size_t> order(pts.size());
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double diameter = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      diameter = std::max(diameter, ((pts[k] - pts[best]).array() / width.array()).abs().maxCoeff());
    }
    const double spread = vals[worst] - vals[best];
    if (std::isfinite(vals[best]) && spread <= opts.ftol * (1.0 + std::abs(vals[best])) && diameter <= opts.xtol) {
      res.converged = true;
      break;
    }
    if (std::isfinite(vals[best]) && spread <= opts.ftol * (1.0 + std::abs(vals[best])) * 1e-3) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= opts.max_evaluations) break;
    ++res.iterations;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(m);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k != worst) centroid += pts[k];
    }
    centroid /= static_cast<double>(m);

    auto trial = [&](double coef) {
      return bounds.project(centroid + coef * (pts[worst] - centroid));
    };
    const Eigen::VectorXd xr = trial(-1.0);
    const double fr = detail::safe_eval(f, xr, res.evaluations);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = trial(-2.0);
      const double fe = detail::safe_eval(f, xe, res.evaluations);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc = trial(outside ? -0.5 : 0.5);
    const double fc = detail::safe_eval(f, xc, res.evaluations);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == best) continue;
      pts[k] = bounds.project(pts[best] + 0.5 * (pts[k] - pts[best]));
      vals[k] = detail::safe_eval(f, pts[k], res.evaluations);
    }
  }
  const auto best_it = std::min_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(best_it - vals.begin())];
  res.f = *best_it;
  return res;
}

struct PolishOptions {
  double gradient_tol = 1e-6;  // on the projected gradient, times (1 + |f|)
  double relative_tol = 1e-10;
  double fd_step = 1e-5;
  std::size_t max_iterations = 500;
};

struct PolishResult : LocalResult {
  Eigen::VectorXd projected_gradient;
  bool at_boundary = false;
};

namespace detail {

/// Finite-difference gradient that switches to one-sided differences at the box.
inline Eigen::VectorXd box_gradient(const Objective& f, const Eigen::VectorXd& x, double fx, const Bounds& bounds,
                                    double rel_step, std::size_t& counter) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x[j]));
    const bool up_ok = x[j] + h <= bounds.upper[j];
    const bool down_ok = x[j] - h >= bounds.lower[j];
    if (up_ok && down_ok) {
      y[j] = x[j] + h;
      const double fp = safe_eval(f, y, counter);
      y[j] = x[j] - h;
      const double fm = safe_eval(f, y, counter);
      g[j] = (fp - fm) / (2.0 * h);
    } else if (up_ok) {
      y[j] = x[j] + h;
      g[j] = (safe_eval(f, y, counter) - fx) / h;
    } else {
      y[j] = x[j] - h;
      g[j] = (fx - safe_eval(f, y, counter)) / h;
    }
    y[j] = x[j];
  }
  return g;
}

inline Eigen::VectorXd projected(const Eigen::VectorXd& g, const Eigen::VectorXd& x, const Bounds& bounds) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    if ((x[j] <= bounds.lower[j] && g[j] > 0.0) || (x[j] >= bounds.upper[j] && g[j] < 0.0)) pg[j] = 0.0;
  }
  return pg;
}

}  // namespace detail

/// Quasi-Newton (BFGS) refinement with finite-difference gradients, projected onto the box.
inline PolishResult bfgs_polish(const Objective& f, const Eigen::VectorXd& x0, const Bounds& bounds,
                                const PolishOptions& opts = {}) {
  const Eigen::Index m = x0.size();
  PolishResult res;
  Eigen::VectorXd x = bounds.project(x0);
  double fx = detail::safe_eval(f, x, res.evaluations);
  if (!std::isfinite(fx)) {
    res.x = x;
    res.f = fx;
    return res;
  }
  Eigen::VectorXd g = detail::box_gradient(f, x, fx, bounds, opts.fd_step, res.evaluations);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(m, m);
  bool scaled = false;

  auto grad_ok = [&](const Eigen::VectorXd& pg) {
    return pg.lpNorm<Eigen::Infinity>() <= opts.gradient_tol * (1.0 + std::abs(fx));
  };

  Eigen::VectorXd pg = detail::projected(g, x, bounds);
  int small_changes = 0;
  while (res.iterations < opts.max_iterations && !grad_ok(pg)) {
    ++res.iterations;
    Eigen::VectorXd d = -(hinv * pg);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (pg[j] == 0.0 && g[j] != 0.0) d[j] = 0.0;
    }
    if (!(g.dot(d) < 0.0)) {
      hinv.setIdentity();
      scaled = false;
      d = -pg;
    }
    if (!scaled) {
      // Unscaled first step: cap it at a tenth of the box in the widest move.
      const double step_cap = 0.1 * (bounds.width().array() / d.array().abs().max(1e-300)).minCoeff();
      if (step_cap < 1.0) d *= step_cap;
    }

    double t = 1.0;
    Eigen::VectorXd xn;
    double fn = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      xn = bounds.project(x + t * d);
      fn = detail::safe_eval(f, xn, res.evaluations);
      if (fn <= fx + 1e-4 * g.dot(xn - x)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || (xn - x).lpNorm<Eigen::Infinity>() == 0.0) {
      if (scaled) {
        hinv.setIdentity();
        scaled = false;
        continue;
      }
      break;
    }

    const Eigen::VectorXd gn = detail::box_gradient(f, xn, fn, bounds, opts.fd_step, res.evaluations);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        hinv = Eigen::MatrixXd::Identity(m, m) * (sy / y.dot(y));
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);
      hinv = (id - rho * s * y.transpose()) * hinv * (id - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    const double change = std::abs(fx - fn);
    x = xn;
    fx = fn;
    g = gn;
    pg = detail::projected(g, x, bounds);
    // Stalls after ten consecutive negligible decreases.
    small_changes = change <= opts.relative_tol * (1.0 + std::abs(fx)) ? small_changes + 1 : 0;
    if (small_changes >= 10) break;
  }
  res.x = x;
  res.f = fx;
  res.projected_gradient = pg;
  res.converged = grad_ok(pg);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (x[j] <= bounds.lower[j] || x[j] >= bounds.upper[j]) res.at_boundary = true;
  }
  return res;
}

/// Radical-inverse (Halton) points mapped into the box, starting at sequence index `skip`.
inline std::vector<Eigen::VectorXd> halton_points(const Bounds& bounds, std::size_t count, std::size_t skip = 1) {
  static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  require(bounds.size() <= static_cast<Eigen::Index>(std::size(primes)), "halton_points: dimension too large");
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Eigen::VectorXd p(bounds.size());
    for (Eigen::Index j = 0; j < bounds.size(); ++j) {
      const int base = primes[j];
      double inv = 1.0 / base;
      double frac = inv;
      double value = 0.0;
      for (std::size_t i = k + skip; i > 0; i /= static_cast<std::size_t>(base)) {
        value += static_cast<double>(i % static_cast<std::size_t>(base)) * frac;
        frac *= inv;
      }
      p[j] = bounds.lower[j] + value * (bounds.upper[j] - bounds.lower[j]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace sdetest::opt
