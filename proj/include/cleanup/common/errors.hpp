#pragma once

#include <stdexcept>
#include <string>

namespace cleanup {

/// Invalid configuration, map, or input shape. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation not valid in the current state (e.g. stepping a finished episode).
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Persisted data failed an integrity check.
class CorruptionError : public std::runtime_error {
 public:
  CorruptionError(const std::string& what, long step = -1)
      : std::runtime_error(what), step_(step) {}

  /// First divergent or truncated step, -1 when not step-specific.
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace cleanup
