#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctune {

enum class ErrorCode {
  kMalformedRecord,
  kNonRectangular,
  kBadConfidence,
  kNTrainTooLarge,
  kNoIncorrectExamples,
  kMissingPrice,
  kAllInfinite,
  kSingleClassTrainingSet,
  kEmptyInput,
  kSingularInformation,
  kTooFewInteriorPoints,
  kDegenerateInput,
  kTauOutOfRange,
  kConditioningOnNullEvent,
  kMissingPairCopula,
  kInvalidThreshold,
  kOptimizerDiverged,
  kEmptySweep,
  kCandidateBudgetExceeded,
  kTooFewPoints,
  kSinglePoint,
  kInvalidArgument,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Every library failure is reported through this type; `code()` lets callers
// (and the CLI's exit-code mapping) branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ctune
