#pragma once

// Exception taxonomy shared by every distillkit component.  All failures derive
// from distillkit::Error so callers can catch the library as a family, while
// the concrete types keep distinct failure modes distinguishable in tests and
// in the command-line tool's exit-code mapping.

#include <stdexcept>
#include <string>

namespace distillkit {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A vector or matrix argument does not have the size the operation requires.
class DimensionMismatch : public Error {
public:
  explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

// A symmetric matrix expected to be positive (semi)definite is not.
class NotPositiveDefinite : public Error {
public:
  explicit NotPositiveDefinite(const std::string& what) : Error(what) {}
};

// The labels lie in the regime where the only admissible fit is the zero
// function, so no positive multiplier exists.
class CollapseCondition : public Error {
public:
  explicit CollapseCondition(const std::string& what) : Error(what) {}
};

// An iterative routine exhausted its budget or could not establish a bracket.
class ConvergenceFailure : public Error {
public:
  explicit ConvergenceFailure(const std::string& what) : Error(what) {}
};

// An input lies outside the mathematical domain of the requested kernel or
// parameter (e.g. spline inputs outside [0,1], nonpositive bandwidth).
class DomainViolation : public Error {
public:
  explicit DomainViolation(const std::string& what) : Error(what) {}
};

// An index refers past the recorded data (e.g. a round a trace never reached).
class OutOfRange : public Error {
public:
  explicit OutOfRange(const std::string& what) : Error(what) {}
};

// The requested round exists only as the collapse marker of a trace; there is
// no model to build for it.
class CollapsedRound : public Error {
public:
  explicit CollapsedRound(const std::string& what) : Error(what) {}
};

// A documented precondition of an analysis formula was not met.
class PreconditionViolation : public Error {
public:
  explicit PreconditionViolation(const std::string& what) : Error(what) {}
};

// A comparison target could not be reproduced (e.g. no single-fit tolerance
// reaches the requested error level).
class MatchFailure : public Error {
public:
  explicit MatchFailure(const std::string& what) : Error(what) {}
};

// Configuration or input files are missing, unreadable, or malformed.
class BadConfig : public Error {
public:
  explicit BadConfig(const std::string& what) : Error(what) {}
};

// Two dataset points coincide within tolerance, which makes the Gram matrix
// structurally singular.
class DuplicatePoints : public Error {
public:
  explicit DuplicatePoints(const std::string& what) : Error(what) {}
};

// A file could not be read, written, or renamed into place.
class IoFailure : public Error {
public:
  explicit IoFailure(const std::string& what) : Error(what) {}
};

}  // namespace distillkit
