#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsgp {

enum class ErrorCode {
  kStructural,
  kIncomplete,
  kTrailing,
  kUnknownToken,
  kPrecondition,
  kLengthMismatch,
  kNonFinite,
  kConstantColumn,
  kSequenceTooLong,
  kNonFiniteLoss,
  kBadMagic,
  kManifestMismatch,
  kTruncated,
  kMissingTarget,
  kNonNumericCell,
  kTooFewRows,
  kNotFound,
  kNetwork,
  kEmpty,
  kMixedMethods,
  kIo,
  kFormat,
};

inline std::string_view to_string(ErrorCode code);

/// Every library failure carries one of the codes above so callers (and the
/// CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kStructural: return "STRUCTURAL";
    case ErrorCode::kIncomplete: return "INCOMPLETE";
    case ErrorCode::kTrailing: return "TRAILING";
    case ErrorCode::kUnknownToken: return "UNKNOWN_TOKEN";
    case ErrorCode::kPrecondition: return "PRECONDITION";
    case ErrorCode::kLengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::kNonFinite: return "NONFINITE";
    case ErrorCode::kConstantColumn: return "CONSTANT_COLUMN";
    case ErrorCode::kSequenceTooLong: return "SEQUENCE_TOO_LONG";
    case ErrorCode::kNonFiniteLoss: return "NONFINITE_LOSS";
    case ErrorCode::kBadMagic: return "BAD_MAGIC";
    case ErrorCode::kManifestMismatch: return "MANIFEST_MISMATCH";
    case ErrorCode::kTruncated: return "TRUNCATED";
    case ErrorCode::kMissingTarget: return "MISSING_TARGET";
    case ErrorCode::kNonNumericCell: return "NON_NUMERIC_CELL";
    case ErrorCode::kTooFewRows: return "TOO_FEW_ROWS";
    case ErrorCode::kNotFound: return "NOT_FOUND";
    case ErrorCode::kNetwork: return "NETWORK";
    case ErrorCode::kEmpty: return "EMPTY";
    case ErrorCode::kMixedMethods: return "MIXED_METHODS";
    case ErrorCode::kIo: return "IO";
    case ErrorCode::kFormat: return "FORMAT";
  }
  return "UNKNOWN";
}

}  // namespace tsgp
