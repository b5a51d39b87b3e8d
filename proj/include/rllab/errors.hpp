#pragma once

#include <stdexcept>
#include <string>

namespace rllab {

// Invalid user-supplied configuration: flags, config files, constructor arguments.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension mismatch detected before any arithmetic runs.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or a failed numeric sanity check.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally inconsistent data: broken trajectory chaining, corrupt files.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rllab
