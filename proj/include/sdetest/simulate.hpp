#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sdetest/error.hpp"
#include "sdetest/format.hpp"
#include "sdetest/model.hpp"
#include "sdetest/params.hpp"
#include "sdetest/rng.hpp"

namespace sdetest {

struct SimConfig {
  std::size_t n = 0;
  double delta = 0.0;
  std::size_t refine = 30;
  double x0 = 1.0;
  std::uint64_t seed = 0;
};

/// Equispaced observations X_0, ..., X_n at spacing delta.
class SamplePath {
 public:
  SamplePath(double delta, std::vector<double> values) : delta_(delta), values_(std::move(values)) {
    require(delta_ > 0.0 && std::isfinite(delta_), "SamplePath: delta must be positive and finite");
    require(values_.size() >= 3, "SamplePath: need at least 3 observations (n >= 2)");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      require(std::isfinite(values_[i]), "SamplePath: non-finite value at index " + std::to_string(i));
    }
  }

  double delta() const noexcept { return delta_; }
  /// Number of increments n (one less than the number of values).
  std::size_t n() const noexcept { return values_.size() - 1; }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double horizon() const noexcept { return delta_ * static_cast<double>(n()); }

  friend bool operator==(const SamplePath&, const SamplePath&) = default;

 private:
  double delta_;
  std::vector<double> values_;
};

struct Schedule {
  double horizon;
  double delta;
};

/// Horizon T = n^(1/3) and step T / n, so that n*delta grows while n*delta^2 vanishes.
inline Schedule observation_schedule(std::size_t n) {
  require(n >= 2, "observation_schedule: n must be at least 2");
  const double horizon = std::cbrt(static_cast<double>(n));
  return {horizon, horizon / static_cast<double>(n)};
}

namespace detail {

inline bool simulate_once(const Model& model, const ParamVector& theta, const SimConfig& cfg, std::uint64_t seed,
                          std::vector<double>& out, std::size_t& bad_step) {
  NormalStream normal(seed);
  const double h = cfg.delta / static_cast<double>(cfg.refine);
  const double sqrt_h = std::sqrt(h);
  const auto& domain = model.state_domain;
  double x = cfg.x0;
  out.assign(cfg.n + 1, 0.0);
  out[0] = x;
  for (std::size_t i = 1; i <= cfg.n; ++i) {
    for (std::size_t k = 0; k < cfg.refine; ++k) {
      // Full truncation: diffusion sees the state clamped into the domain, drift sees the raw state.
      x += model.drift(theta, x) * h + model.diff(theta, domain.clamp(x)) * sqrt_h * normal();
    }
    if (!std::isfinite(x)) {
      bad_step = i;
      return false;
    }
    out[i] = x;
    if (!domain.contains(x)) {
      bad_step = i;
      return false;
    }
  }
  return true;
}

}  // namespace detail

inline constexpr int kSimulationAttempts = 5;

/**
 * Euler-Maruyama at internal step delta/refine, keeping every refine-th point.
 *
 * A replication whose retained observation leaves the state domain is redrawn
 * from a seed derived from (seed, attempt); after kSimulationAttempts failures a
 * SimulationError carrying the offending observation index is thrown.
 */
inline SamplePath euler_maruyama(const Model& model, const ParamVector& theta, const SimConfig& cfg) {
  model.check_theta(theta);
  require(cfg.n >= 2, "SimConfig: n must be at least 2");
  require(cfg.delta > 0.0 && std::isfinite(cfg.delta), "SimConfig: delta must be positive");
  require(cfg.refine >= 1, "SimConfig: refine must be at least 1");
  require(model.state_domain.contains(cfg.x0), "SimConfig: x0 outside the model state domain");
  require(model.box.contains(theta), "euler_maruyama: theta outside the parameter box");

  std::vector<double> values;
  std::size_t bad_step = 0;
  for (int attempt = 0; attempt < kSimulationAttempts; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(attempt));
    if (detail::simulate_once(model, theta, cfg, seed, values, bad_step)) {
      return SamplePath(cfg.delta, std::move(values));
    }
  }
  throw SimulationError(bad_step, model.name + ": path left the state domain in every attempt");
}

inline void write_path_csv(std::ostream& os, const SamplePath& path) {
  os << "t,x\n";
  for (std::size_t i = 0; i < path.values().size(); ++i) {
    os << format_double(static_cast<double>(i) * path.delta()) << ',' << format_double(path[i]) << '\n';
  }
}

inline SamplePath read_path_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != "t,x") {
    throw Error(ErrorCode::invalid_argument, "path CSV: expected header 't,x'");
  }
  std::vector<double> times;
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    if (fields.size() != 2) throw Error(ErrorCode::invalid_argument, "path CSV: expected two columns");
    times.push_back(parse_double(fields[0]));
    values.push_back(parse_double(fields[1]));
  }
  require(values.size() >= 3, "path CSV: need at least 3 rows");
  const double delta = times[1] - times[0];
  require(delta > 0.0, "path CSV: time column must increase");
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double expected = times[0] + static_cast<double>(i) * delta;
    if (std::abs(times[i] - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
      throw Error(ErrorCode::invalid_argument, "path CSV: times are not equispaced at row " + std::to_string(i));
    }
  }
  return SamplePath(delta, std::move(values));
}

inline void save_path_csv(const std::string& file, const SamplePath& path) {
  std::ofstream os(file);
  if (!os) throw Error(ErrorCode::io, "cannot open '" + file + "' for writing");
  write_path_csv(os, path);
  if (!os) throw Error(ErrorCode::io, "failed writing '" + file + "'");
}

inline SamplePath load_path_csv(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw Error(ErrorCode::io, "cannot open '" + file + "'");
  return read_path_csv(is);
}

}  // namespace sdetest
