#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sdetest/error.hpp"

namespace sdetest {

/// Parameter vector split into a drift block (alpha) and a diffusion block (beta).
struct ParamVector {
  std::vector<double> alpha;
  std::vector<double> beta;

  ParamVector() = default;
  ParamVector(std::vector<double> a, std::vector<double> b) : alpha(std::move(a)), beta(std::move(b)) {
    require(!alpha.empty() && !beta.empty(), "ParamVector needs m1 >= 1 and m2 >= 1");
  }

  std::size_t m1() const noexcept { return alpha.size(); }
  std::size_t m2() const noexcept { return beta.size(); }
  std::size_t size() const noexcept { return alpha.size() + beta.size(); }

  double operator[](std::size_t i) const { return i < alpha.size() ? alpha[i] : beta[i - alpha.size()]; }
  double& operator[](std::size_t i) { return i < alpha.size() ? alpha[i] : beta[i - alpha.size()]; }

  std::vector<double> flat() const {
    std::vector<double> out(alpha);
    out.insert(out.end(), beta.begin(), beta.end());
    return out;
  }

  static ParamVector from_flat(std::span<const double> values, std::size_t m1) {
    require(m1 >= 1 && values.size() > m1, "flat parameter vector too short for the block split");
    return ParamVector(std::vector<double>(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m1)),
                       std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(m1), values.end()));
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

inline std::string to_string(const ParamVector& theta) {
  std::string out;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(theta[i]);
  }
  return out;
}

/// Compact rectangle holding the admissible parameters, stored in flat order.
class ParamBox {
 public:
  ParamBox() = default;
  ParamBox(std::vector<double> lower, std::vector<double> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    require(lower_.size() == upper_.size() && !lower_.empty(), "ParamBox bounds must have equal, nonzero length");
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      require(std::isfinite(lower_[i]) && std::isfinite(upper_[i]) && lower_[i] < upper_[i],
              "ParamBox requires finite lower[i] < upper[i] (coordinate " + std::to_string(i) + ")");
    }
  }

  static ParamBox uniform(std::size_t dim, double lo, double hi) {
    return ParamBox(std::vector<double>(dim, lo), std::vector<double>(dim, hi));
  }

  std::size_t size() const noexcept { return lower_.size(); }
  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& upper() const noexcept { return upper_; }
  double lower(std::size_t i) const { return lower_.at(i); }
  double upper(std::size_t i) const { return upper_.at(i); }

  bool contains(const ParamVector& theta) const {
    if (theta.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (!(theta[i] >= lower_[i] && theta[i] <= upper_[i])) return false;
    }
    return true;
  }

  /// Index of the first coordinate outside the box, or size() when inside.
  std::size_t first_violation(const ParamVector& theta) const {
    for (std::size_t i = 0; i < size() && i < theta.size(); ++i) {
      if (!(theta[i] >= lower_[i] && theta[i] <= upper_[i])) return i;
    }
    return size();
  }

  std::vector<double> center() const {
    std::vector<double> c(size());
    for (std::size_t i = 0; i < size(); ++i) c[i] = 0.5 * (lower_[i] + upper_[i]);
    return c;
  }

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

}  // namespace sdetest
