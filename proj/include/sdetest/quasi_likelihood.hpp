#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdetest/error.hpp"
#include "sdetest/model.hpp"
#include "sdetest/numdiff.hpp"
#include "sdetest/params.hpp"
#include "sdetest/simulate.hpp"

namespace sdetest {

/// Which contrast the per-observation terms use.
enum class Contrast {
  corrected,       // local Gaussian with the Delta*d1 / Delta*e1 corrections
  local_gaussian,  // corrections forced to zero
};

/// A model bound to an observed path.
///
/// The contrast is a negative quasi-loglikelihood: smaller is a better fit and
/// the estimator minimizes it. The additive constant log(2*pi*Delta)/2 per term
/// is omitted.
class QLContext {
 public:
  QLContext(Model model, SamplePath path, Contrast contrast = Contrast::corrected)
      : model_(std::move(model)), path_(std::move(path)), contrast_(contrast) {
    for (std::size_t i = 0; i < path_.values().size(); ++i) {
      if (!model_.state_domain.contains(path_[i])) {
        throw Error(ErrorCode::domain, model_.name + ": observation " + std::to_string(i) +
                                           " lies outside the state domain");
      }
    }
  }

  const Model& model() const noexcept { return model_; }
  const SamplePath& path() const noexcept { return path_; }
  Contrast contrast() const noexcept { return contrast_; }
  std::size_t n() const noexcept { return path_.n(); }
  double delta() const noexcept { return path_.delta(); }

 private:
  Model model_;
  SamplePath path_;
  Contrast contrast_;
};

namespace detail {

inline double ql_term_unchecked(const QLContext& ctx, const ParamVector& theta, std::size_t i) {
  const Model& model = ctx.model();
  const double delta = ctx.delta();
  const double prev = ctx.path()[i - 1];
  const auto k = model.local(theta, prev);
  if (!(k.c > 0.0)) {
    throw Error(ErrorCode::model_contract, model.name + ": squared diffusion is not positive at observation " +
                                               std::to_string(i - 1));
  }
  const double resid = ctx.path()[i] - (prev + delta * k.b);
  double weight = 1.0;
  double log_term = std::log(k.c);
  if (ctx.contrast() == Contrast::corrected) {
    const double d1 = -gamma2(k) / k.c;
    weight += delta * d1;
    log_term -= delta * d1;  // e1 = -d1
    // The corrected variance factor must stay positive; otherwise the contrast
    // is unbounded below and theta is treated as inadmissible.
    if (!(weight > 0.0)) return std::numeric_limits<double>::infinity();
  }
  return resid * resid / (2.0 * delta * k.c) * weight + 0.5 * log_term;
}

inline Eigen::VectorXd to_eigen(const ParamVector& theta) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(theta.size()));
  for (std::size_t i = 0; i < theta.size(); ++i) v[static_cast<Eigen::Index>(i)] = theta[i];
  return v;
}

inline ParamVector from_eigen(const Eigen::VectorXd& v, std::size_t m1) {
  return ParamVector::from_flat(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), m1);
}

}  // namespace detail

/// Per-observation contrast term for the increment X_{i-1} -> X_i, 1 <= i <= n.
/// Returns +infinity where the corrected variance factor 1 + Delta*d1 is not positive.
inline double ql_term(const QLContext& ctx, const ParamVector& theta, std::size_t i) {
  ctx.model().check_theta(theta);
  require(i >= 1 && i <= ctx.n(), "ql_term: index out of range 1..n");
  return detail::ql_term_unchecked(ctx, theta, i);
}

/// All n terms, in order.
inline std::vector<double> ql_terms(const QLContext& ctx, const ParamVector& theta) {
  ctx.model().check_theta(theta);
  std::vector<double> out(ctx.n());
  for (std::size_t i = 1; i <= ctx.n(); ++i) out[i - 1] = detail::ql_term_unchecked(ctx, theta, i);
  return out;
}

inline double ql_total(const QLContext& ctx, const ParamVector& theta) {
  ctx.model().check_theta(theta);
  double sum = 0.0;
  for (std::size_t i = 1; i <= ctx.n(); ++i) sum += detail::ql_term_unchecked(ctx, theta, i);
  return sum;
}

namespace detail {

/// Throws BoundaryError unless theta +- h stays inside the box in every coordinate.
inline void require_stencil_inside(const ParamBox& box, const Eigen::VectorXd& x, const std::vector<double>& h,
                                   const char* who) {
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const auto u = static_cast<std::size_t>(j);
    if (x[j] - h[u] < box.lower(u) || x[j] + h[u] > box.upper(u)) {
      throw BoundaryError(u, std::string(who) + ": parameter too close to the box boundary for finite differences");
    }
  }
}

/// Moves x inward so that the stencil x +- h fits in the box.
inline Eigen::VectorXd pull_inside(const ParamBox& box, Eigen::VectorXd x, const std::vector<double>& h) {
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const auto u = static_cast<std::size_t>(j);
    x[j] = std::clamp(x[j], box.lower(u) + h[u], box.upper(u) - h[u]);
  }
  return x;
}

}  // namespace detail

/// How derivative evaluations treat a point whose stencil crosses the box.
enum class BoundaryPolicy {
  reject,       // throw BoundaryError naming the coordinate
  pull_inside,  // evaluate at the nearest point whose stencil fits
};

inline Eigen::VectorXd ql_grad(const QLContext& ctx, const ParamVector& theta,
                               BoundaryPolicy policy = BoundaryPolicy::reject) {
  ctx.model().check_theta(theta);
  Eigen::VectorXd x = detail::to_eigen(theta);
  const auto h = fd_steps(x, kGradientStep);
  if (policy == BoundaryPolicy::reject) {
    detail::require_stencil_inside(ctx.model().box, x, h, "ql_grad");
  } else {
    x = detail::pull_inside(ctx.model().box, x, h);
  }
  const std::size_t m1 = ctx.model().m1;
  return central_gradient([&](const Eigen::VectorXd& y) { return ql_total(ctx, detail::from_eigen(y, m1)); }, x, h);
}

inline Eigen::MatrixXd ql_hess(const QLContext& ctx, const ParamVector& theta,
                               BoundaryPolicy policy = BoundaryPolicy::reject) {
  ctx.model().check_theta(theta);
  Eigen::VectorXd x = detail::to_eigen(theta);
  const auto h = fd_steps(x, kHessianStep);
  if (policy == BoundaryPolicy::reject) {
    detail::require_stencil_inside(ctx.model().box, x, h, "ql_hess");
  } else {
    x = detail::pull_inside(ctx.model().box, x, h);
  }
  const std::size_t m1 = ctx.model().m1;
  return central_hessian([&](const Eigen::VectorXd& y) { return ql_total(ctx, detail::from_eigen(y, m1)); }, x, h);
}

/// Information matrix in the (alpha, beta) block layout.
class InfoMatrix {
 public:
  InfoMatrix(Eigen::MatrixXd full, std::size_t m1) : full_(std::move(full)), m1_(m1) {
    require(full_.rows() == full_.cols() && static_cast<std::size_t>(full_.rows()) > m1_ && m1_ >= 1,
            "InfoMatrix: bad dimensions");
  }

  const Eigen::MatrixXd& full() const noexcept { return full_; }
  std::size_t m1() const noexcept { return m1_; }
  std::size_t m2() const noexcept { return static_cast<std::size_t>(full_.rows()) - m1_; }

  Eigen::MatrixXd block_aa() const { return full_.topLeftCorner(idx(m1_), idx(m1_)); }
  Eigen::MatrixXd block_ab() const { return full_.topRightCorner(idx(m1_), idx(m2())); }
  Eigen::MatrixXd block_bb() const { return full_.bottomRightCorner(idx(m2()), idx(m2())); }

  /// h' I h.
  double quadratic_form(const Eigen::VectorXd& h) const { return h.dot(full_ * h); }

 private:
  static Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }
  Eigen::MatrixXd full_;
  std::size_t m1_;
};

/// Scaled Hessian of the contrast: blocks divided by n*Delta, n*sqrt(Delta) and n.
inline InfoMatrix observed_info(const QLContext& ctx, const ParamVector& theta,
                                BoundaryPolicy policy = BoundaryPolicy::reject) {
  Eigen::MatrixXd hess = ql_hess(ctx, theta, policy);
  const auto m1 = static_cast<Eigen::Index>(ctx.model().m1);
  const auto m = hess.rows();
  const double n = static_cast<double>(ctx.n());
  const double delta = ctx.delta();
  hess.topLeftCorner(m1, m1) /= n * delta;
  hess.topRightCorner(m1, m - m1) /= n * std::sqrt(delta);
  hess.bottomLeftCorner(m - m1, m1) /= n * std::sqrt(delta);
  hess.bottomRightCorner(m - m1, m - m1) /= n;
  return InfoMatrix(std::move(hess), ctx.model().m1);
}

/// Empirical Fisher information: path averages of (d_alpha b)(d_alpha b)'/c and
/// (d_beta c)(d_beta c)'/(2 c^2) over X_0..X_{n-1}, with parameter derivatives by
/// central differences. Block diagonal by construction.
inline InfoMatrix fisher_info(const QLContext& ctx, const ParamVector& theta,
                              BoundaryPolicy policy = BoundaryPolicy::reject) {
  const Model& model = ctx.model();
  model.check_theta(theta);
  Eigen::VectorXd x = detail::to_eigen(theta);
  const auto h = fd_steps(x, kGradientStep);
  if (policy == BoundaryPolicy::reject) {
    detail::require_stencil_inside(model.box, x, h, "fisher_info");
  } else {
    x = detail::pull_inside(model.box, x, h);
  }
  const ParamVector center = detail::from_eigen(x, model.m1);
  const std::size_t m1 = model.m1;
  const std::size_t m2 = model.m2;
  const std::size_t m = m1 + m2;

  // Shifted parameter vectors, built once.
  std::vector<ParamVector> plus(m, center);
  std::vector<ParamVector> minus(m, center);
  for (std::size_t j = 0; j < m; ++j) {
    plus[j][j] += h[j];
    minus[j][j] -= h[j];
  }

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  Eigen::VectorXd db(static_cast<Eigen::Index>(m1));
  Eigen::VectorXd dc(static_cast<Eigen::Index>(m2));
  const auto& values = ctx.path().values();
  for (std::size_t i = 0; i < ctx.n(); ++i) {
    const double xi = values[i];
    const double c = model.diffsq(center, xi);
    for (std::size_t j = 0; j < m1; ++j) {
      db[static_cast<Eigen::Index>(j)] = (model.drift(plus[j], xi) - model.drift(minus[j], xi)) / (2.0 * h[j]);
    }
    for (std::size_t j = 0; j < m2; ++j) {
      const std::size_t k = m1 + j;
      dc[static_cast<Eigen::Index>(j)] = (model.diffsq(plus[k], xi) - model.diffsq(minus[k], xi)) / (2.0 * h[k]);
    }
    info.topLeftCorner(static_cast<Eigen::Index>(m1), static_cast<Eigen::Index>(m1)) += db * db.transpose() / c;
    info.bottomRightCorner(static_cast<Eigen::Index>(m2), static_cast<Eigen::Index>(m2)) +=
        dc * dc.transpose() / (2.0 * c * c);
  }
  info /= static_cast<double>(ctx.n());
  return InfoMatrix(std::move(info), m1);
}

}  // namespace sdetest
