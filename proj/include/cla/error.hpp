#pragma once

#include <stdexcept>
#include <string>

namespace cla {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad syntax, unknown names, arity mismatch, bad patterns,
// inconsistent configuration. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A computation that cannot produce a value. The CLI maps these to exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

// An aggregation node saw no element outside the range of the assignment.
class EmptyAggregation : public NumericError {
 public:
  using NumericError::NumericError;
};

// Elimination was requested for an aggregator without a distribution-level
// characterization.
class UnsupportedAggregator : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace cla
