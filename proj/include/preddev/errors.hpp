#pragma once

#include <stdexcept>
#include <string>

namespace preddev {

/// Invalid configuration or arguments.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed or insufficient data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An optimizer or integrator could not produce a result.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace preddev
