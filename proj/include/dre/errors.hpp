#pragma once

#include <stdexcept>
#include <string>

namespace dre {

/// Base class of every failure raised by the library. `code()` is a stable,
/// machine-readable identifier used by the CLI error records.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define DRE_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

DRE_DEFINE_ERROR(DimensionMismatch);
DRE_DEFINE_ERROR(SingularA);
DRE_DEFINE_ERROR(InvalidConfig);
DRE_DEFINE_ERROR(RankDeficientSeed);
DRE_DEFINE_ERROR(Breakdown);
DRE_DEFINE_ERROR(SpectrumIncompatible);
DRE_DEFINE_ERROR(NoStabilizingGuess);
DRE_DEFINE_ERROR(MaxIterations);
DRE_DEFINE_ERROR(UnsupportedOrder);
DRE_DEFINE_ERROR(NotConverged);
DRE_DEFINE_ERROR(IndefiniteY);
DRE_DEFINE_ERROR(UnstableClosedLoop);
DRE_DEFINE_ERROR(ParseError);
DRE_DEFINE_ERROR(SingularBracket);
DRE_DEFINE_ERROR(NotObservable);
DRE_DEFINE_ERROR(SingularMassStiffness);
DRE_DEFINE_ERROR(NoConventionMatches);

#undef DRE_DEFINE_ERROR

/// A failure inside one implicit time step; keeps the step index and the
/// code of the underlying error.
class StepFailure : public Error {
 public:
  StepFailure(long step, const Error& cause)
      : Error("StepFailure", "time step " + std::to_string(step) + ": [" +
                                 cause.code() + "] " + cause.what()),
        step_(step),
        cause_code_(cause.code()) {}
  long step() const noexcept { return step_; }
  const std::string& cause_code() const noexcept { return cause_code_; }

 private:
  long step_;
  std::string cause_code_;
};

}  // namespace dre
