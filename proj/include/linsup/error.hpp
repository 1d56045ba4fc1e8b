// Copyright 2026 The linsup Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LINSUP_ERROR_HPP_
#define LINSUP_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

namespace linsup {

enum class ErrorCode {
  kInvalidArgument,
  kNonIdentifiable,
  kNotInPolytope,
  kBoundViolation,
  kDegeneratePrivacy,
  kTooLarge,
  kInfinite,
  kSingularInformation,
  kSingular,
  kSequenceTooShort,
  kRegionTooLarge,
  kMissingCoordinate,
  kNoData,
  kParse,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNonIdentifiable: return "NonIdentifiable";
    case ErrorCode::kNotInPolytope: return "NotInPolytope";
    case ErrorCode::kBoundViolation: return "BoundViolation";
    case ErrorCode::kDegeneratePrivacy: return "DegeneratePrivacy";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kInfinite: return "Infinite";
    case ErrorCode::kSingularInformation: return "SingularInformation";
    case ErrorCode::kSingular: return "Singular";
    case ErrorCode::kSequenceTooShort: return "SequenceTooShort";
    case ErrorCode::kRegionTooLarge: return "RegionTooLarge";
    case ErrorCode::kMissingCoordinate: return "MissingCoordinate";
    case ErrorCode::kNoData: return "NoData";
    case ErrorCode::kParse: return "Parse";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when the moments pin down a direction the features cannot see.
class NonIdentifiableError : public Error {
 public:
  NonIdentifiableError(const std::string& message, Eigen::VectorXd direction)
      : Error(ErrorCode::kNonIdentifiable, message),
        null_direction_(std::move(direction)) {}

  const Eigen::VectorXd& null_direction() const noexcept {
    return null_direction_;
  }

 private:
  Eigen::VectorXd null_direction_;
};

inline void Require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::kInvalidArgument, message);
}

}  // namespace linsup

#endif  // LINSUP_ERROR_HPP_
