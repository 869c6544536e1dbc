#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sdetest {

enum class ErrorCode {
  invalid_argument,
  domain,
  simulation,
  boundary,
  model_contract,
  estimation,
  rao_undefined,
  failure_budget,
  io,
};

/// Base class for every error raised by the library. The code lets front ends
/// map failures to exit statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class SimulationError : public Error {
 public:
  SimulationError(std::size_t step, const std::string& what)
      : Error(ErrorCode::simulation, what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class BoundaryError : public Error {
 public:
  BoundaryError(std::size_t coordinate, const std::string& what)
      : Error(ErrorCode::boundary, what + " (coordinate " + std::to_string(coordinate) + ")"),
        coordinate_(coordinate) {}
  std::size_t coordinate() const noexcept { return coordinate_; }

 private:
  std::size_t coordinate_;
};

class EstimationError : public Error {
 public:
  EstimationError(std::string diagnostics)
      : Error(ErrorCode::estimation, "estimation failed: " + diagnostics),
        diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

inline void require(bool condition, const std::string& message,
                    ErrorCode code = ErrorCode::invalid_argument) {
  if (!condition) throw Error(code, message);
}

}  // namespace sdetest
