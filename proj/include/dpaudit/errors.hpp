#pragma once

#include <stdexcept>
#include <string>

namespace dpaudit {

// Base for all toolkit errors. `kind()` is a stable machine-parseable class
// name used by the CLI for one-line error reporting and exit-code mapping.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define DPAUDIT_DEFINE_ERROR(Name)                          \
  class Name : public Error {                               \
   public:                                                  \
    explicit Name(const std::string& msg) : Error(#Name, msg) {} \
  }

DPAUDIT_DEFINE_ERROR(ConfigError);
DPAUDIT_DEFINE_ERROR(ParseError);
DPAUDIT_DEFINE_ERROR(NonConvergence);
DPAUDIT_DEFINE_ERROR(WeightError);
DPAUDIT_DEFINE_ERROR(OutOfScopeRate);
DPAUDIT_DEFINE_ERROR(TierError);
DPAUDIT_DEFINE_ERROR(InsufficientCohort);
DPAUDIT_DEFINE_ERROR(UnknownVariant);
DPAUDIT_DEFINE_ERROR(EmptyInput);
DPAUDIT_DEFINE_ERROR(EmptyExplanation);
DPAUDIT_DEFINE_ERROR(TagParseError);
DPAUDIT_DEFINE_ERROR(DegenerateData);
DPAUDIT_DEFINE_ERROR(SeparationError);
DPAUDIT_DEFINE_ERROR(SingularDesign);
DPAUDIT_DEFINE_ERROR(NoPairs);
DPAUDIT_DEFINE_ERROR(InsufficientOverlap);
DPAUDIT_DEFINE_ERROR(MissingStage);
DPAUDIT_DEFINE_ERROR(PartialArtifact);
DPAUDIT_DEFINE_ERROR(LockError);
DPAUDIT_DEFINE_ERROR(IoError);

#undef DPAUDIT_DEFINE_ERROR

}  // namespace dpaudit
