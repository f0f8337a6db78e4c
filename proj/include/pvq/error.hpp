#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pvq {

/// Stable error identifiers shared by the library and the CLI.
enum class ErrorCode {
  NonMonic,
  ZeroConstantTerm,
  RationalRootFound,
  RootFindingDiverged,
  AmbiguousLeadingRoot,
  UnsupportedPrecision,
  ContextMismatch,
  NotPV,
  NotIntegral,
  NotUnitConstant,
  InadmissibleWindow,
  WindowTooLarge,
  TooFewPoints,
  AlphabetUnstable,
  OccurrenceInconsistent,
  TooFewOccurrences,
  Overflow,
  SumRuleViolated,
  ZeroCoefficient,
  NonIncreasingTranslations,
  ZeroPolynomial,
  QuadratureNonconvergent,
  AllSamplesClipped,
  ZeroHit,
  ZeroOnOrbit,
  TranslationOutsideWindow,
  InsufficientCoverage,
  BadConfig,
  UnknownCommand,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonMonic: return "NonMonic";
    case ErrorCode::ZeroConstantTerm: return "ZeroConstantTerm";
    case ErrorCode::RationalRootFound: return "RationalRootFound";
    case ErrorCode::RootFindingDiverged: return "RootFindingDiverged";
    case ErrorCode::AmbiguousLeadingRoot: return "AmbiguousLeadingRoot";
    case ErrorCode::UnsupportedPrecision: return "UnsupportedPrecision";
    case ErrorCode::ContextMismatch: return "ContextMismatch";
    case ErrorCode::NotPV: return "NotPV";
    case ErrorCode::NotIntegral: return "NotIntegral";
    case ErrorCode::NotUnitConstant: return "NotUnitConstant";
    case ErrorCode::InadmissibleWindow: return "InadmissibleWindow";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::AlphabetUnstable: return "AlphabetUnstable";
    case ErrorCode::OccurrenceInconsistent: return "OccurrenceInconsistent";
    case ErrorCode::TooFewOccurrences: return "TooFewOccurrences";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::SumRuleViolated: return "SumRuleViolated";
    case ErrorCode::ZeroCoefficient: return "ZeroCoefficient";
    case ErrorCode::NonIncreasingTranslations: return "NonIncreasingTranslations";
    case ErrorCode::ZeroPolynomial: return "ZeroPolynomial";
    case ErrorCode::QuadratureNonconvergent: return "QuadratureNonconvergent";
    case ErrorCode::AllSamplesClipped: return "AllSamplesClipped";
    case ErrorCode::ZeroHit: return "ZeroHit";
    case ErrorCode::ZeroOnOrbit: return "ZeroOnOrbit";
    case ErrorCode::TranslationOutsideWindow: return "TranslationOutsideWindow";
    case ErrorCode::InsufficientCoverage: return "InsufficientCoverage";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::UnknownCommand: return "UnknownCommand";
  }
  return "Unknown";
}

/// Process exit code for an error: 2 validation, 3 numerical non-convergence,
/// 4 budget exceeded.
inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::RootFindingDiverged:
    case ErrorCode::QuadratureNonconvergent:
    case ErrorCode::AllSamplesClipped:
      return 3;
    case ErrorCode::WindowTooLarge:
    case ErrorCode::Overflow:
      return 4;
    default:
      return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// ZeroHit carries the exponent j with A(alpha * lambda^j) == 0.
class ZeroHitError : public Error {
 public:
  ZeroHitError(int exponent, const std::string& what)
      : Error(ErrorCode::ZeroHit, what), exponent_(exponent) {}

  int exponent() const noexcept { return exponent_; }

 private:
  int exponent_;
};

}  // namespace pvq
