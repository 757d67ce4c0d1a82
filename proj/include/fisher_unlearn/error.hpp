/*
 * Copyright 2026 The fisher-unlearn Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FISHER_UNLEARN_ERROR_HPP_
#define FISHER_UNLEARN_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace fisher_unlearn {

enum class ErrorCode {
  kInvalidArgument,
  kSingularMatrix,
  kBadRange,
  kLengthMismatch,
  kShapeMismatch,
  kLayoutMismatch,
  kRecursionBudgetExceeded,
  kEmptyStream,
  kEmptyCorpus,
  kEmptySplit,
  kTooShort,
  kEmptyForgetSet,
  kEmptyRetainSet,
  kAllDataForgotten,
  kUnknownLayer,
  kInsufficientData,
  kIoError,
  kBadFractions,
  kBadConfig,
  kNonFinite,
};

inline constexpr std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSingularMatrix: return "SingularMatrix";
    case ErrorCode::kBadRange: return "BadRange";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kLayoutMismatch: return "LayoutMismatch";
    case ErrorCode::kRecursionBudgetExceeded: return "RecursionBudgetExceeded";
    case ErrorCode::kEmptyStream: return "EmptyStream";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kEmptyForgetSet: return "EmptyForgetSet";
    case ErrorCode::kEmptyRetainSet: return "EmptyRetainSet";
    case ErrorCode::kAllDataForgotten: return "AllDataForgotten";
    case ErrorCode::kUnknownLayer: return "UnknownLayer";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kBadFractions: return "BadFractions";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kNonFinite: return "NonFinite";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so
// callers (and tests) can branch on the kind of failure, not the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fisher_unlearn

#endif  // FISHER_UNLEARN_ERROR_HPP_
