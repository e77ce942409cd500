#pragma once

#include <stdexcept>
#include <string>

namespace geoexp {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix dimension is odd, non-positive, or inconsistent with its partner.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An operation was called on input that violates its documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Weighted normal equations are singular within the pivot tolerance.
class DegenerateDesignError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// The GEO-responsiveness model is rank deficient beyond its known sum-to-zero direction.
class IdentifiabilityError : public Error {
 public:
  using Error::Error;
};

/// Observed data is outside the support of the hierarchical model (e.g. y_pre <= 0).
class ModelViolationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or configuration value.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace geoexp
