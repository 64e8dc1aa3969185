#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mismatch {

enum class ErrorCode {
  NonSquare,
  AsymmetryTooLarge,
  NumericalFailure,
  NotOrthonormal,
  NotPSD,
  NotPD,
  AmbientMismatch,
  TrivialSubspace,
  NotContained,
  RankExceedsAmbient,
  RankDeficient,
  EmptySampleSet,
  RankTooLarge,
  DimensionMismatch,
  NonpositiveNoise,
  DegenerateMismatchedRank,
  SigmaNotPD,
  ConditionsFail,
  KernelDetNonpositive,
  DiagonalityViolated,
  NotOrthogonal,
  DegenerateOverlap,
  InsufficientPoints,
  InsufficientSamples,
  InvalidArgument,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable code; every failure in the library
/// surfaces as one of these.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mismatch
