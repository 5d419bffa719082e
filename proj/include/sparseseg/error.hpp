#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sparseseg {

enum class ErrorCode {
  MalformedHeader,
  TruncatedData,
  UnsupportedDatatype,
  UnsupportedDimensionality,
  UnsupportedVersion,
  DimensionMismatch,
  SpacingMismatch,
  NonPositiveSpacing,
  EmptyMask,
  EmptyCounts,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// command-line front end can map it to an exit status.
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
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::UnsupportedDimensionality: return "UnsupportedDimensionality";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SpacingMismatch: return "SpacingMismatch";
    case ErrorCode::NonPositiveSpacing: return "NonPositiveSpacing";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::EmptyCounts: return "EmptyCounts";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace sparseseg
