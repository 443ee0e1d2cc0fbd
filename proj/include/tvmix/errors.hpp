#pragma once

#include <stdexcept>

namespace tvmix {

// Bad arguments: mismatched dimensions, off-simplex weights, out-of-range times.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical breakdown: failed factorizations, diverged integrations.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files: CSV parse failures, model schema mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation not defined for the given configuration (e.g. CDF beyond d = 1).
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace tvmix
