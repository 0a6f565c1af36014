#pragma once

#include <stdexcept>
#include <string>

namespace hybred {

// Stable machine-readable failure codes. Every throwing operation in the
// library uses one of these; the CLI maps them onto exit codes and JSON
// error reports, so the enumerator names are part of the public surface.
enum class ErrorCode {
  // integration / event handling
  NoEventBeforeTmax,
  TangentialCrossing,
  StepFailure,
  EvaluationFailure,
  ConvergenceFailure,
  // hybrid execution
  ZenoSuspicion,
  EscapeDomain,
  // root finding / return maps
  NoConvergence,
  SingularJacobian,
  NoReturn,
  WrongSequence,
  // reduction / phase
  DeviationUnderflow,
  NotConverged,
  // control
  RankDeficient,
  NotStabilizable,
  WrenchInfeasible,
  StepTimeUndefined,
  // configuration / plumbing
  InvalidArgument,
  InvalidConfig,
  IoError,
};

const char* to_string(ErrorCode code);

// Classification used by the CLI exit-code policy: config errors exit 2,
// numerical failures exit 3, model-assumption violations (tangency, Zeno,
// domain escape) exit 4.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace hybred
