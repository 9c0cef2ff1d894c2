#pragma once

#include <stdexcept>
#include <string>

namespace tagnav {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates a documented precondition (non-positive size, bad config...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to converge or a matrix was singular.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// Point correspondences do not determine a unique solution.
class RankDeficiency : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// Projection of a point with non-positive depth.
class BehindCamera : public Error {
 public:
  using Error::Error;
};

/// Angle between vectors requested for a zero-length vector.
class UndefinedAngle : public Error {
 public:
  using Error::Error;
};

/// A drone command cannot be executed in the current simulator state.
class SimError : public Error {
 public:
  using Error::Error;
};

/// Malformed text on the command link.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// The command link stopped answering after all retries.
class LinkDown : public Error {
 public:
  using Error::Error;
};

/// No approach can be planned from a detection (tag face seen edge-on from above/below).
class NoPlan : public Error {
 public:
  using Error::Error;
};

/// Failure reading or writing one of the project's file formats.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Lookup of an unknown mission or resource.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// Request incompatible with the current state (a mission is already running).
class Conflict : public Error {
 public:
  using Error::Error;
};

}  // namespace tagnav
