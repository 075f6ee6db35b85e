#include "ctune/error.hpp"
#include "ctune/parallel.hpp"

#include <atomic>

namespace ctune {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kNonRectangular: return "NonRectangular";
    case ErrorCode::kBadConfidence: return "BadConfidence";
    case ErrorCode::kNTrainTooLarge: return "NTrainTooLarge";
    case ErrorCode::kNoIncorrectExamples: return "NoIncorrectExamples";
    case ErrorCode::kMissingPrice: return "MissingPrice";
    case ErrorCode::kAllInfinite: return "AllInfinite";
    case ErrorCode::kSingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kSingularInformation: return "SingularInformation";
    case ErrorCode::kTooFewInteriorPoints: return "TooFewInteriorPoints";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kTauOutOfRange: return "TauOutOfRange";
    case ErrorCode::kConditioningOnNullEvent: return "ConditioningOnNullEvent";
    case ErrorCode::kMissingPairCopula: return "MissingPairCopula";
    case ErrorCode::kInvalidThreshold: return "InvalidThreshold";
    case ErrorCode::kOptimizerDiverged: return "OptimizerDiverged";
    case ErrorCode::kEmptySweep: return "EmptySweep";
    case ErrorCode::kCandidateBudgetExceeded: return "CandidateBudgetExceeded";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kSinglePoint: return "SinglePoint";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

namespace {
std::atomic<std::size_t> g_threads{1};
}

void set_thread_count(std::size_t n) {
  if (n == 0) n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  g_threads.store(n);
}

std::size_t thread_count() { return g_threads.load(); }

}  // namespace ctune
