#pragma once

#include <stdexcept>
#include <string>

namespace rmpc {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct EmptySetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnboundedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BadProblemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InitializationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvariantViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct DegenerateHullError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rmpc
