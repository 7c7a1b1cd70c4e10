#include "rlrt/error.hpp"

namespace rlrt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParams: return "invalid-params";
    case ErrorCode::kBudgetExceeded: return "budget-exceeded";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kTokenOutOfRange: return "token-out-of-range";
    case ErrorCode::kDegenerateTeacher: return "degenerate-teacher";
    case ErrorCode::kGroupTooSmall: return "group-too-small";
    case ErrorCode::kNonFinite: return "nonfinite";
    case ErrorCode::kEmptyCorpus: return "empty-corpus";
    case ErrorCode::kNoEligiblePrompts: return "no-eligible-prompts";
    case ErrorCode::kInvalidArgs: return "invalid-args";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace rlrt
