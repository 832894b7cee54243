#include "focuscal/error.h"

namespace focuscal {

std::string_view ErrorName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kInsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kPointAtInfinity: return "PointAtInfinity";
    case ErrorCode::kTooFewCentralPoints: return "TooFewCentralPoints";
    case ErrorCode::kNoPlateauFound: return "NoPlateauFound";
    case ErrorCode::kEmptyZone2: return "EmptyZone2";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kSingularIntrinsics: return "SingularIntrinsics";
    case ErrorCode::kSingularInput: return "SingularInput";
    case ErrorCode::kDegenerateViewSet: return "DegenerateViewSet";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kMissingScaleForDistance: return "MissingScaleForDistance";
    case ErrorCode::kLinearAlgebraFailure: return "LinearAlgebraFailure";
    case ErrorCode::kEmptyView: return "EmptyView";
    case ErrorCode::kMissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorName(code)) + ": " + message),
      code_(code) {}

void Throw(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace focuscal
