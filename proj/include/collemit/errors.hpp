#pragma once

#include <stdexcept>
#include <string>

namespace collemit {

/// Bad input: empty geometry, nonpositive spacing, malformed config, ...
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver or integrator did not reach its tolerance.
class ConvergenceFailure : public std::runtime_error {
 public:
  ConvergenceFailure(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Request exceeds a hard memory guard (dense Hilbert spaces).
class ResourceLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The coherent pattern has no forward peak to measure a width on.
class NoPeakError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace collemit
