#include "hybred/errors.hpp"

namespace hybred {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoEventBeforeTmax: return "NoEventBeforeTmax";
    case ErrorCode::TangentialCrossing: return "TangentialCrossing";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::EvaluationFailure: return "EvaluationFailure";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::ZenoSuspicion: return "ZenoSuspicion";
    case ErrorCode::EscapeDomain: return "EscapeDomain";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NoReturn: return "NoReturn";
    case ErrorCode::WrongSequence: return "WrongSequence";
    case ErrorCode::DeviationUnderflow: return "DeviationUnderflow";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NotStabilizable: return "NotStabilizable";
    case ErrorCode::WrenchInfeasible: return "WrenchInfeasible";
    case ErrorCode::StepTimeUndefined: return "StepTimeUndefined";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidConfig:
    case ErrorCode::IoError:
      return 2;
    case ErrorCode::TangentialCrossing:
    case ErrorCode::ZenoSuspicion:
    case ErrorCode::EscapeDomain:
      return 4;
    default:
      return 3;
  }
}

}  // namespace hybred
