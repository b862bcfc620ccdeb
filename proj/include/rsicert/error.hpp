#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rsicert {

enum class ErrorCode {
  // series
  ParseError,
  UnitMismatch,
  NonMonotoneTime,
  NonPositiveValue,
  InsufficientWindow,
  DegenerateRegressor,
  OutOfRange,
  GridMismatch,
  RhoOutOfRange,
  InvalidSeries,
  // capability
  MissingTask,
  RefOutOfRange,
  InvalidBenchmark,
  // envelopes
  TemperatureOrdering,
  NegativePower,
  NonPositiveTemperature,
  NegativeDelta,
  InvalidParams,
  // dynamics
  NonPositivePhi,
  SubcriticalExponent,
  BeyondBlowup,
  StepUnderflowWithoutThreshold,
  EnvelopeOrderViolation,
  AmbiguousFlags,
  // estimate
  SingularDesign,
  AllWindowsDegenerate,
  InsufficientRange,
  WeakInstrument,
  NonPositiveSeries,
  TooShort,
  // certify
  ZeroGradient,
  // safectl
  InfeasibleBox,
  NoStaticCapPossible,
  // cli / io
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Error raised by every module. The code identifies the failure class; the
/// message carries the details (file, line, offending value).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace rsicert
