#include "rsicert/error.hpp"

namespace rsicert {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnitMismatch: return "UnitMismatch";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::InsufficientWindow: return "InsufficientWindow";
    case ErrorCode::DegenerateRegressor: return "DegenerateRegressor";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::RhoOutOfRange: return "RhoOutOfRange";
    case ErrorCode::InvalidSeries: return "InvalidSeries";
    case ErrorCode::MissingTask: return "MissingTask";
    case ErrorCode::RefOutOfRange: return "RefOutOfRange";
    case ErrorCode::InvalidBenchmark: return "InvalidBenchmark";
    case ErrorCode::TemperatureOrdering: return "TemperatureOrdering";
    case ErrorCode::NegativePower: return "NegativePower";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::NegativeDelta: return "NegativeDelta";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::NonPositivePhi: return "NonPositivePhi";
    case ErrorCode::SubcriticalExponent: return "SubcriticalExponent";
    case ErrorCode::BeyondBlowup: return "BeyondBlowup";
    case ErrorCode::StepUnderflowWithoutThreshold: return "StepUnderflowWithoutThreshold";
    case ErrorCode::EnvelopeOrderViolation: return "EnvelopeOrderViolation";
    case ErrorCode::AmbiguousFlags: return "AmbiguousFlags";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::AllWindowsDegenerate: return "AllWindowsDegenerate";
    case ErrorCode::InsufficientRange: return "InsufficientRange";
    case ErrorCode::WeakInstrument: return "WeakInstrument";
    case ErrorCode::NonPositiveSeries: return "NonPositiveSeries";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ZeroGradient: return "ZeroGradient";
    case ErrorCode::InfeasibleBox: return "InfeasibleBox";
    case ErrorCode::NoStaticCapPossible: return "NoStaticCapPossible";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace rsicert
