#pragma once

#include <stdexcept>
#include <string>

namespace threshcox {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyCohort : Error {
  EmptyCohort() : Error("cohort has no subjects") {}
};

struct MalformedRecord : Error {
  int row;
  MalformedRecord(int row_, const std::string& what_)
      : Error("malformed record at row " + std::to_string(row_) + ": " + what_), row(row_) {}
};

struct Unidentifiable : Error {
  Unidentifiable() : Error("reliability study has no row with >= 2 replicates") {}
};

struct DegenerateEta : Error {
  DegenerateEta() : Error("posterior residual sd eta is zero") {}
};

struct OverflowError : Error {
  explicit OverflowError(double x)
      : Error("relative-risk exponent " + std::to_string(x) + " exceeds cap") {}
};

struct EmptyRiskSet : Error {
  double t;
  explicit EmptyRiskSet(double t_)
      : Error("empty risk set at event time " + std::to_string(t_)), t(t_) {}
};

struct SingularInformation : Error {
  SingularInformation() : Error("information matrix is singular") {}
};

struct SingularLambda : Error {
  SingularLambda() : Error("outer Jacobian Lambda is singular") {}
};

struct DegenerateBracket : Error {
  DegenerateBracket() : Error("tau bracket is degenerate (all values equal)") {}
};

struct TooFewBootstrapSuccesses : Error {
  TooFewBootstrapSuccesses() : Error("fewer than half of bootstrap resamples converged") {}
};

struct ExtrapolationFailure : Error {
  ExtrapolationFailure() : Error("fewer than 2 usable lambda points for extrapolation") {}
};

struct CalibrationFailure : Error {
  explicit CalibrationFailure(double target)
      : Error("baseline hazard calibration cannot reach incidence " + std::to_string(target)) {}
};

struct QuadratureFailure : Error {
  QuadratureFailure() : Error("non-finite quadrature panel sum") {}
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace threshcox
