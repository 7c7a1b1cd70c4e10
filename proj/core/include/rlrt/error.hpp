#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rlrt {

enum class ErrorCode {
  kInvalidParams,
  kBudgetExceeded,
  kLengthMismatch,
  kTokenOutOfRange,
  kDegenerateTeacher,
  kGroupTooSmall,
  kNonFinite,
  kEmptyCorpus,
  kNoEligiblePrompts,
  kInvalidArgs,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace rlrt
