#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rescene {

enum class ErrorCode {
  DepthNonPositive,
  EmptyInput,
  EmptyMesh,
  AllFacesCulled,
  ShapeMismatch,
  InsufficientPoints,
  NoConsensus,
  Diverged,
  DegenerateCloud,
  SamplingFailed,
  NonFinite,
  EmptyMask,
  LayoutOverflow,
  SizeMismatch,
  ParseError,
  UnsupportedVariant,
  BadMagic,
  BadVersion,
  TruncatedPayload,
  InvalidArgument,
  IoError,
  ServiceError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // 3 for numerical failures, 2 for everything a user can fix in their inputs.
  int exit_code() const noexcept;

 private:
  ErrorCode code_;
};

}  // namespace rescene
