#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace accel2grf {

enum class ErrorCode {
  // ingest
  MissingFile,
  MalformedCsv,
  UnitError,
  UnknownSensorName,
  UpsampleRequested,
  // simulate
  TrackTooShort,
  // align
  DegenerateVariance,
  // gait
  NoContact,
  MissingSensor,
  WindowOutOfBounds,
  NotLeftStance,
  // encode
  EmptyWindow,
  TooFewSamples,
  DimensionMismatch,
  // model
  ShapeMismatch,
  ArchitectureMismatch,
  EmptyDataset,
  KMismatch,
  ChecksumMismatch,
  // eval
  ZeroVariance,
  ZeroRange,
  // plumbing
  IoError,
  ConfigError,
  EmptySubset,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace accel2grf
