#pragma once

#include <stdexcept>
#include <string>

namespace ftle {

enum class ErrorCode {
  // parameter / configuration errors
  OutOfRange,
  NegativeVariance,
  NonPositiveDimension,
  KernelConstraintViolated,
  ConstraintViolated,
  NotPositiveSemidefinite,
  UnnormalizableKernel,
  EmptySample,
  WindowTooShort,
  TooFewSamples,
  ConfigError,
  // numerical failures
  StepTooLarge,
  Overflow,
  DegenerateConfiguration,
  DegenerateSpectrum,
  OrderingUnrecoverable,
  CalibrationFailed,
};

const char* to_string(ErrorCode code);

// True for failures that come from the numerics rather than from the inputs.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NegativeVariance: return "NegativeVariance";
    case ErrorCode::NonPositiveDimension: return "NonPositiveDimension";
    case ErrorCode::KernelConstraintViolated: return "KernelConstraintViolated";
    case ErrorCode::ConstraintViolated: return "ConstraintViolated";
    case ErrorCode::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorCode::UnnormalizableKernel: return "UnnormalizableKernel";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::OrderingUnrecoverable: return "OrderingUnrecoverable";
    case ErrorCode::CalibrationFailed: return "CalibrationFailed";
  }
  return "Unknown";
}

inline bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::StepTooLarge:
    case ErrorCode::Overflow:
    case ErrorCode::DegenerateConfiguration:
    case ErrorCode::DegenerateSpectrum:
    case ErrorCode::OrderingUnrecoverable:
    case ErrorCode::CalibrationFailed:
      return true;
    default:
      return false;
  }
}

}  // namespace ftle
