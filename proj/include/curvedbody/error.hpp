#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace curvedbody {

enum class ErrorCode {
  NegativeSeparationSquare,
  OffManifold,
  ZeroCurvatureShift,
  AtProjectionPole,
  OutsideDisk,
  SingularMetric,
  SingularConfiguration,
  ZeroCurvature,
  Collision,
  AntipodalSingularity,
  FrameMismatch,
  FormulationInvalidAtKappa,
  InvalidMasses,
  InvalidConfig,
  StepUnderflow,
  LiftOutOfRange,
  Validation,
  Io,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeSeparationSquare: return "NegativeSeparationSquare";
    case ErrorCode::OffManifold: return "OffManifold";
    case ErrorCode::ZeroCurvatureShift: return "ZeroCurvatureShift";
    case ErrorCode::AtProjectionPole: return "AtProjectionPole";
    case ErrorCode::OutsideDisk: return "OutsideDisk";
    case ErrorCode::SingularMetric: return "SingularMetric";
    case ErrorCode::SingularConfiguration: return "SingularConfiguration";
    case ErrorCode::ZeroCurvature: return "ZeroCurvature";
    case ErrorCode::Collision: return "Collision";
    case ErrorCode::AntipodalSingularity: return "AntipodalSingularity";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::FormulationInvalidAtKappa: return "FormulationInvalidAtKappa";
    case ErrorCode::InvalidMasses: return "InvalidMasses";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::LiftOutOfRange: return "LiftOutOfRange";
    case ErrorCode::Validation: return "Validation";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries an ErrorCode so callers
/// (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace curvedbody
