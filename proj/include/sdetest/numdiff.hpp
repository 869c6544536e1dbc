#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace sdetest {

/// Relative central-difference step used for gradients.
inline constexpr double kGradientStep = 1e-5;
/// Relative step for second differences; larger than the gradient step because
/// rounding error in a second difference grows like eps / h^2.
inline constexpr double kHessianStep = 1e-4;

inline std::vector<double> fd_steps(const Eigen::VectorXd& x, double relative) {
  std::vector<double> h(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) h[static_cast<std::size_t>(j)] = relative * std::max(1.0, std::abs(x[j]));
  return h;
}

template <class F>
Eigen::VectorXd central_gradient(const F& f, const Eigen::VectorXd& x, const std::vector<double>& h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double hj = h[static_cast<std::size_t>(j)];
    y[j] = x[j] + hj;
    const double fp = f(y);
    y[j] = x[j] - hj;
    const double fm = f(y);
    y[j] = x[j];
    g[j] = (fp - fm) / (2.0 * hj);
  }
  return g;
}

/// Central-difference Hessian, symmetrized as (H + H')/2.
template <class F>
Eigen::MatrixXd central_hessian(const F& f, const Eigen::VectorXd& x, const std::vector<double>& h) {
  const Eigen::Index m = x.size();
  Eigen::MatrixXd hess(m, m);
  Eigen::VectorXd y = x;
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double hi = h[static_cast<std::size_t>(i)];
    y[i] = x[i] + hi;
    const double fp = f(y);
    y[i] = x[i] - hi;
    const double fm = f(y);
    y[i] = x[i];
    hess(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double hj = h[static_cast<std::size_t>(j)];
      auto eval = [&](double si, double sj) {
        y[i] = x[i] + si * hi;
        y[j] = x[j] + sj * hj;
        const double v = f(y);
        y[i] = x[i];
        y[j] = x[j];
        return v;
      };
      const double v = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * hi * hj);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace sdetest
