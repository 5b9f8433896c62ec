#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rmm {

enum class ErrorCode {
  NonSquare,
  NegativeEntry,
  NonFinite,
  RowSumViolation,
  NotABijection,
  DimensionMismatch,
  InvalidArgument,
  RepeatedLambda,
  NonConvergent,
  DegenerateStationary,
  QRNoConvergence,
  DimensionTooLarge,
  KrylovNoConvergence,
  WindowTooShort,
  ZeroVariance,
  NonPositiveValue,
  EmptyInput,
  NonMixing,
  ConfigError,
  IoError,
  NumericalFailure,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::RowSumViolation: return "RowSumViolation";
    case ErrorCode::NotABijection: return "NotABijection";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RepeatedLambda: return "RepeatedLambda";
    case ErrorCode::NonConvergent: return "NonConvergent";
    case ErrorCode::DegenerateStationary: return "DegenerateStationary";
    case ErrorCode::QRNoConvergence: return "QRNoConvergence";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::KrylovNoConvergence: return "KrylovNoConvergence";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonMixing: return "NonMixing";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library. The code is the
/// stable, machine-readable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a row of a candidate stochastic matrix does not sum to one.
/// Reports the worst offending row and its signed deviation (sum - 1).
class RowSumError : public Error {
 public:
  RowSumError(std::size_t row, double deviation)
      : Error(ErrorCode::RowSumViolation,
              "row " + std::to_string(row) + " deviates from unit sum by " +
                  std::to_string(deviation)),
        row_(row),
        deviation_(deviation) {}

  [[nodiscard]] std::size_t row() const noexcept { return row_; }
  [[nodiscard]] double deviation() const noexcept { return deviation_; }

 private:
  std::size_t row_;
  double deviation_;
};

}  // namespace rmm
