#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace tipsim {

/// Configuration problem: mismatched dimensions, bad run specs, rejected
/// config keys. Distinct from std::invalid_argument, which is reserved for
/// violated numerical preconditions.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure in a solver or propagator. Carries the iteration count
/// and the best residual reached so failed runs can be diagnosed.
class NumericsError : public std::runtime_error {
 public:
  explicit NumericsError(const std::string& what, long iterations = -1,
                         double residual = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

  long iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  long iterations_;
  double residual_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tipsim
