// Copyright 2026 The dpgauss Authors
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

#ifndef DPGAUSS_ERROR_HPP_
#define DPGAUSS_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpgauss {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNotSymmetric,
  kNotPsd,
  kSingularCovariance,
  kZeroRank,
  kEmptyDataset,
  kWrongDimension,
  kPreconditionViolated,
  kParameterOrder,
  kLatticeExplosion,
  kEmptyCandidates,
  kUnknownTheorem,
  kFewerThanTwoPoints,
  kNotNeighbors,
  kConstantViolation,
  kParse,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kNotPsd: return "NotPsd";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kZeroRank: return "ZeroRank";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kWrongDimension: return "WrongDimension";
    case ErrorCode::kPreconditionViolated: return "PreconditionViolated";
    case ErrorCode::kParameterOrder: return "ParameterOrder";
    case ErrorCode::kLatticeExplosion: return "LatticeExplosion";
    case ErrorCode::kEmptyCandidates: return "EmptyCandidates";
    case ErrorCode::kUnknownTheorem: return "UnknownTheorem";
    case ErrorCode::kFewerThanTwoPoints: return "FewerThanTwoPoints";
    case ErrorCode::kNotNeighbors: return "NotNeighbors";
    case ErrorCode::kConstantViolation: return "ConstantViolation";
    case ErrorCode::kParse: return "Parse";
  }
  return "Unknown";
}

// Every failure in the library is reported as an Error carrying a code that
// callers (and the CLI exit-code mapping) can switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace internal {

inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace internal
}  // namespace dpgauss

#endif  // DPGAUSS_ERROR_HPP_
