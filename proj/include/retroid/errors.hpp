#pragma once

#include <stdexcept>
#include <string>

namespace retroid {

/// Bad input data or arguments. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration (unknown backend, bad grid, ...). Also exit code 1.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Filesystem or environment failure. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace retroid
