#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twr {

enum class ErrorCode {
  // input / format
  MalformedHeader,
  DimensionMismatch,
  NonFiniteValue,
  IoFailure,
  InvalidArgument,
  IndexOutOfRange,
  InvalidLength,
  // numerics
  ConvergenceFailure,
  DegenerateOperator,
  ZeroColumn,
  SingularUpdate,
  RankDeficient,
  NonFinite,
  FoldTooSmall,
  NoValidComponent,
  SilentTruth,
  NoEnergy,
};

/// Coarse grouping used by the CLI to pick an exit code.
enum class ErrorCategory { Config, Numeric, Io };

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidLength: return "InvalidLength";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::DegenerateOperator: return "DegenerateOperator";
    case ErrorCode::ZeroColumn: return "ZeroColumn";
    case ErrorCode::SingularUpdate: return "SingularUpdate";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::FoldTooSmall: return "FoldTooSmall";
    case ErrorCode::NoValidComponent: return "NoValidComponent";
    case ErrorCode::SilentTruth: return "SilentTruth";
    case ErrorCode::NoEnergy: return "NoEnergy";
  }
  return "Unknown";
}

constexpr ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoFailure:
      return ErrorCategory::Io;
    case ErrorCode::MalformedHeader:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::InvalidArgument:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::InvalidLength:
      return ErrorCategory::Config;
    default:
      return ErrorCategory::Numeric;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace twr
