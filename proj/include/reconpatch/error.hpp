#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reconpatch {

enum class ErrorCode {
  // feature_io
  MalformedHeader,
  DTypeMismatch,
  NonFiniteValue,
  TruncatedPayload,
  InvalidShape,
  IoFailure,
  ParseError,
  MissingLevelPath,
  DuplicateSampleId,
  InvariantViolation,
  // patch_features
  EvenPatchSize,
  PatchTooLarge,
  EmptyList,
  NonDecreasingResolution,
  // similarity
  NonPositiveSigma,
  KOutOfRange,
  ShapeMismatch,
  AlphaOutOfRange,
  // repr_learning
  DimMismatch,
  GammaOutOfRange,
  EmptyDataset,
  // memory_bank
  EmptyInput,
  FractionOutOfRange,
  VersionMismatch,
  CorruptPayload,
  // scoring
  BankTooSmall,
  EmptyMap,
  InvalidTarget,
  LengthMismatch,
  DegenerateVariance,
  // eval
  SingleClass,
  // cli
  ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::DTypeMismatch: return "DTypeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingLevelPath: return "MissingLevelPath";
    case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::EvenPatchSize: return "EvenPatchSize";
    case ErrorCode::PatchTooLarge: return "PatchTooLarge";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::NonDecreasingResolution: return "NonDecreasingResolution";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::GammaOutOfRange: return "GammaOutOfRange";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::FractionOutOfRange: return "FractionOutOfRange";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptPayload: return "CorruptPayload";
    case ErrorCode::BankTooSmall: return "BankTooSmall";
    case ErrorCode::EmptyMap: return "EmptyMap";
    case ErrorCode::InvalidTarget: return "InvalidTarget";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

// Every failure in the library surfaces as an Error carrying a code, so
// callers (tests, the CLI) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace reconpatch
