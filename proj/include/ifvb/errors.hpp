#pragma once

#include <stdexcept>
#include <string>

namespace ifvb {

/// Invalid configuration value or experiment spec. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dimension mismatch between a state and an input vector.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operation applied to a state that cannot serve it (e.g. scaled apply at count 0).
class StateError : public std::runtime_error {
 public:
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values or a failed numeric invariant at runtime. CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A step could not restore a valid iterate after repeated backoff.
class StallError : public NumericError {
 public:
  explicit StallError(const std::string& msg) : NumericError(msg) {}
};

}  // namespace ifvb
