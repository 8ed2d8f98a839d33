#pragma once

#include <stdexcept>
#include <string>

namespace protolens {

/// Bad argument to an operation (n = 0, k > n, sigma <= 0, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent configuration: dimension mismatches, T > T_max, unknown config keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (corpus lines, cache files, checkpoints).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation requires a model that has been through prototype alignment.
class NotAlignedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged (a loss term became non-finite).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace protolens
