#ifndef PIDSTEER_ERRORS_HPP
#define PIDSTEER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pidsteer {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad dimensions, non-finite entries, malformed arguments.
struct InvalidInputError : Error {
  using Error::Error;
};

/// Requested operation requires spectral radius (or contraction factor) < 1.
struct UnstableSystemError : Error {
  using Error::Error;
};

/// A simulation produced a non-finite state. Carries the offending step.
struct DivergenceError : Error {
  DivergenceError(const std::string& what, long step_index)
      : Error(what + " (step " + std::to_string(step_index) + ")"),
        step(step_index) {}
  long step;
};

/// Directional ablation with a (numerically) zero steering vector.
struct DegenerateDirectionError : Error {
  using Error::Error;
};

/// Scalarization of a trace whose initial error is (numerically) zero.
struct DegenerateInitialErrorError : Error {
  using Error::Error;
};

/// A trace is too short or lacks the structure an estimator needs.
struct InsufficientTraceError : Error {
  using Error::Error;
};

struct InvalidCertificateError : Error {
  using Error::Error;
};

struct NearSingularError : Error {
  using Error::Error;
};

}  // namespace pidsteer

#endif  // PIDSTEER_ERRORS_HPP
