#include "wavedisp/common.hpp"

#include <cstdio>

namespace wavedisp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::domain:
      return "DomainError";
    case ErrorCode::configuration:
      return "ConfigurationError";
    case ErrorCode::near_singular:
      return "NearSingularError";
    case ErrorCode::precondition:
      return "PreconditionError";
    case ErrorCode::plan:
      return "PlanError";
    case ErrorCode::tail:
      return "TailError";
    case ErrorCode::fit:
      return "FitError";
    case ErrorCode::horizon:
      return "HorizonError";
    case ErrorCode::parse:
      return "ParseError";
    case ErrorCode::io:
      return "IoError";
    case ErrorCode::internal:
      return "InternalError";
  }
  return "UnknownError";
}

std::string to_scientific(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

}  // namespace wavedisp
