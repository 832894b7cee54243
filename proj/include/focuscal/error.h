#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace focuscal {

enum class ErrorCode {
  kInvalidArgument,
  kNonPositiveDepth,
  kNoConvergence,
  kDegenerateGeometry,
  kInsufficientData,
  kSingularSystem,
  kDegenerateInput,
  kInsufficientCorrespondences,
  kDegenerateConfiguration,
  kPointAtInfinity,
  kTooFewCentralPoints,
  kNoPlateauFound,
  kEmptyZone2,
  kBehindCamera,
  kSingularIntrinsics,
  kSingularInput,
  kDegenerateViewSet,
  kNonConvergence,
  kMissingScaleForDistance,
  kLinearAlgebraFailure,
  kEmptyView,
  kMissingGroundTruth,
  kSchemaError,
  kIoError,
};

// Stable name used in diagnostics and in structured CLI errors.
std::string_view ErrorName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void Throw(ErrorCode code, const std::string& message);

}  // namespace focuscal
