#pragma once

#include <stdexcept>
#include <string>

namespace patree {

enum class ErrorKind {
  NonPositiveValue,
  DomainError,
  ParseError,
  DivergentSeries,
  NoMalthusianRoot,
  DegenerateDerivative,
  NoInteriorMaximum,
  CenteringFailure,
  RepresentationMismatch,
  PreconditionViolation,
};

const char* to_string(ErrorKind kind);

/// Base class of every error raised by the library. The kind is what the CLI
/// maps onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define PATREE_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what)                          \
        : Error(ErrorKind::Name, what) {}                           \
  };

PATREE_DEFINE_ERROR(NonPositiveValue)
PATREE_DEFINE_ERROR(DomainError)
PATREE_DEFINE_ERROR(ParseError)
PATREE_DEFINE_ERROR(DivergentSeries)
PATREE_DEFINE_ERROR(NoMalthusianRoot)
PATREE_DEFINE_ERROR(DegenerateDerivative)
PATREE_DEFINE_ERROR(NoInteriorMaximum)
PATREE_DEFINE_ERROR(CenteringFailure)
PATREE_DEFINE_ERROR(RepresentationMismatch)
PATREE_DEFINE_ERROR(PreconditionViolation)

#undef PATREE_DEFINE_ERROR

}  // namespace patree
