#pragma once

#include <stdexcept>
#include <string>

namespace conegeo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch, non-finite entries, out-of-range indices, bad config values.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A Cholesky factorization (or eigenvalue check) found a non-positive pivot.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// A step or perturbation left the domain where the computation is valid.
class StepTooLarge : public Error {
 public:
  using Error::Error;
};

/// A variance that must be strictly positive was (numerically) zero.
class DegenerateVariance : public Error {
 public:
  using Error::Error;
};

}  // namespace conegeo
