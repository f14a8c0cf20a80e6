#pragma once

#include <stdexcept>
#include <string>

namespace odgen {

// Bad input: shapes, ranges, manifests, malformed files. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite activations or losses. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A (m0, mt) pair that has zero probability under the transition schedule.
class InvalidEvidence : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Regression or curve fitting without enough usable data.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace odgen
