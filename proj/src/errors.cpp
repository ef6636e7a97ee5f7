#include "patree/errors.hpp"

namespace patree {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonPositiveValue: return "NonPositiveValue";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DivergentSeries: return "DivergentSeries";
    case ErrorKind::NoMalthusianRoot: return "NoMalthusianRoot";
    case ErrorKind::DegenerateDerivative: return "DegenerateDerivative";
    case ErrorKind::NoInteriorMaximum: return "NoInteriorMaximum";
    case ErrorKind::CenteringFailure: return "CenteringFailure";
    case ErrorKind::RepresentationMismatch: return "RepresentationMismatch";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
  }
  return "Unknown";
}

}  // namespace patree
