#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slearn {

enum class ErrorKind {
  InvalidJob,
  InvalidConfig,
  InfinitePriorVariance,
  NoInformation,
  GridTooNarrow,
  InvalidPilotCount,
  NoSamples,
  EmptyDistribution,
  NoHistory,
  NonMonotoneHistory,
  DegenerateHistory,
  EmptyDag,
  DuplicateJob,
  UnsortedTrace,
  NoMoreEvents,
  ParseError,
  InvalidDuration,
  InvalidActual,
  JobSetMismatch,
  InsufficientHistory,
  Undefined,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidJob: return "InvalidJob";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InfinitePriorVariance: return "InfinitePriorVariance";
    case ErrorKind::NoInformation: return "NoInformation";
    case ErrorKind::GridTooNarrow: return "GridTooNarrow";
    case ErrorKind::InvalidPilotCount: return "InvalidPilotCount";
    case ErrorKind::NoSamples: return "NoSamples";
    case ErrorKind::EmptyDistribution: return "EmptyDistribution";
    case ErrorKind::NoHistory: return "NoHistory";
    case ErrorKind::NonMonotoneHistory: return "NonMonotoneHistory";
    case ErrorKind::DegenerateHistory: return "DegenerateHistory";
    case ErrorKind::EmptyDag: return "EmptyDag";
    case ErrorKind::DuplicateJob: return "DuplicateJob";
    case ErrorKind::UnsortedTrace: return "UnsortedTrace";
    case ErrorKind::NoMoreEvents: return "NoMoreEvents";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidDuration: return "InvalidDuration";
    case ErrorKind::InvalidActual: return "InvalidActual";
    case ErrorKind::JobSetMismatch: return "JobSetMismatch";
    case ErrorKind::InsufficientHistory: return "InsufficientHistory";
    case ErrorKind::Undefined: return "Undefined";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the ErrorKind tags so
/// callers (and tests) can branch on the contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace slearn
