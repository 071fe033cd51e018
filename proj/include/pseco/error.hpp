#pragma once

#include <stdexcept>
#include <string>

namespace pseco {

// Precondition violation on an argument (degenerate box, length mismatch, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite value produced or consumed by numeric code.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected configuration (out-of-range hyperparameter, unknown key, bad version).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent dataset / params file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pseco
