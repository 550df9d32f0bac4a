#include "rescene/error.hpp"

namespace rescene {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DepthNonPositive: return "DepthNonPositive";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::AllFacesCulled: return "AllFacesCulled";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::SamplingFailed: return "SamplingFailed";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::LayoutOverflow: return "LayoutOverflow";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedVariant: return "UnsupportedVariant";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ServiceError: return "ServiceError";
  }
  return "Unknown";
}

int Error::exit_code() const noexcept {
  switch (code_) {
    case ErrorCode::NoConsensus:
    case ErrorCode::Diverged:
    case ErrorCode::DegenerateCloud:
    case ErrorCode::SamplingFailed:
    case ErrorCode::NonFinite:
    case ErrorCode::AllFacesCulled:
      return 3;
    default:
      return 2;
  }
}

}  // namespace rescene
