#pragma once

#include <stdexcept>
#include <string>

namespace regionboot {

// Malformed input or a violated precondition on user-supplied values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A parameter vector outside the model's constraint set.
class InvalidParameter : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Rectangle bounds given in the wrong order (a2 > a1 or b2 > b1).
class OrderingError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The requested closed form does not exist for this input.
class UnsupportedOracle : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Root finder or optimizer failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every candidate model failed to converge.
class SelectionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace regionboot
