#pragma once

#include <stdexcept>
#include <string>

namespace alcsim {

/// Configuration rejected at load/validation time (CLI exit code 1).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure during time stepping: NaN/Inf, vacuum, failed solve
/// (CLI exit code 2).
struct NumericalFailure : std::runtime_error {
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

/// Density reached the vacuum guard.
struct VacuumError : NumericalFailure {
  explicit VacuumError(const std::string& what) : NumericalFailure(what) {}
};

}  // namespace alcsim
