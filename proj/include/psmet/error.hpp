#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace psmet {

enum class ErrorKind {
  NotHermitian,
  NotUnitary,
  NotProjector,
  NotDensity,
  NotNormalized,
  NonFinite,
  DimensionMismatch,
  InvalidDim,
  SingularOutcome,
  NotAProbability,
  NotTraceless,
  DegenerateGenerator,
  NonpositiveInformation,
  VanishingPostselection,
  SingularOverlap,
  NotPure,
  OrthogonalPostselection,
  InvalidConfig,
  DivergentInformation,
  LimitMismatch,
  InvalidProbability,
  InvalidCost,
  InvalidArgument,
  NumericalFailure,
  ParseError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NotUnitary: return "NotUnitary";
    case ErrorKind::NotProjector: return "NotProjector";
    case ErrorKind::NotDensity: return "NotDensity";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidDim: return "InvalidDim";
    case ErrorKind::SingularOutcome: return "SingularOutcome";
    case ErrorKind::NotAProbability: return "NotAProbability";
    case ErrorKind::NotTraceless: return "NotTraceless";
    case ErrorKind::DegenerateGenerator: return "DegenerateGenerator";
    case ErrorKind::NonpositiveInformation: return "NonpositiveInformation";
    case ErrorKind::VanishingPostselection: return "VanishingPostselection";
    case ErrorKind::SingularOverlap: return "SingularOverlap";
    case ErrorKind::NotPure: return "NotPure";
    case ErrorKind::OrthogonalPostselection: return "OrthogonalPostselection";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::DivergentInformation: return "DivergentInformation";
    case ErrorKind::LimitMismatch: return "LimitMismatch";
    case ErrorKind::InvalidProbability: return "InvalidProbability";
    case ErrorKind::InvalidCost: return "InvalidCost";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace psmet
