#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace subspacekit {

enum class ErrorCode {
  DimensionMismatch,
  NotPositiveDefinite,
  ConvergenceFailure,
  EmptyInput,
  KTooLarge,
  NonPositiveLambda,
  ZeroDiagonalPivot,
  ShapeMismatch,
  StaleTape,
  NonFiniteLoss,
  AllZeroRow,
  LengthMismatch,
  InfeasibleSpec,
  MalformedFile,
  IoFailure,
  EmptyDirectory,
  UnknownPreset,
  InvalidArgument,
};

constexpr std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::NonPositiveLambda: return "NonPositiveLambda";
    case ErrorCode::ZeroDiagonalPivot: return "ZeroDiagonalPivot";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleTape: return "StaleTape";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::AllZeroRow: return "AllZeroRow";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::EmptyDirectory: return "EmptyDirectory";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// CLI prints `code_name()` on standard error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace subspacekit
