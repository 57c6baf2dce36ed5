#pragma once

#include <stdexcept>
#include <string>

namespace smooth_insert {

/// Base of every error thrown by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid construction input (bad shape, non-finite sample, inconsistent sizes).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// A query point or sample lies outside the region an operation is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Shifted grid index leaves the grid or hits an invalid sample.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Not enough valid data to form an estimate.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or insufficient input data.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Sample cloud does not affinely span the domain.
class RankError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The modulation constant could not be escalated to a convex modulated field.
class ModulationError : public Error {
 public:
  using Error::Error;
};

/// Partition-of-unity cover leaves part of the target region uncovered.
class CoverError : public Error {
 public:
  using Error::Error;
};

/// Requested geometry is finer than the grid can resolve.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// No regular level could be selected near the requested value.
class LevelError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant check failed (a bug or a numerical breakdown).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace smooth_insert
