#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bwest {

enum class ErrorCode {
  // estimator
  NoUsableSizes,
  EqualSizes,
  NonPositiveDelayDifference,
  DelayNotAboveIntercept,
  InsufficientPoints,
  NonPositiveSlope,
  // intercept model
  InsufficientObservations,
  RankDeficient,
  // probe engine
  ResolveFailure,
  PermissionDenied,
  AllProbesLost,
  NoReply,
  SocketFailure,
  // statistics
  NoSamples,
  InsufficientSamples,
  // storage
  IoFailure,
  SchemaMismatch,
  CorruptLine,
  MissingColumn,
  EmptyFile,
  // contract violations on inputs
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by load_session when a line fails to parse. `line()` is 1-based.
class CorruptLineError : public Error {
 public:
  CorruptLineError(std::size_t line, const std::string& message)
      : Error(ErrorCode::CorruptLine, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace bwest
