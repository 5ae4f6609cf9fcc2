#pragma once

#include <stdexcept>
#include <string>

namespace lapal {

// Shape or parameter mismatch detected while building or wiring components.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation called in the wrong order (e.g. backward without forward).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite value encountered in a loss, gradient or environment state.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced unusable output (demo quality gate, codec rejection,
// divergence detector). Maps to exit code 3 in the CLI.
class QualityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File missing, truncated, or carrying the wrong header. Exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lapal
