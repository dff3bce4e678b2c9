#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stateval {

enum class ErrorCode {
  InvalidArgument,
  NotSkewSymmetric,
  InvalidRotation,
  DegenerateDomain,
  OutOfDomain,
  Underdetermined,
  RankDeficient,
  MalformedLine,
  NonMonotoneTime,
  DenormalizedQuaternion,
  NoOverlap,
  BadMagic,
  VersionMismatch,
  TruncatedPayload,
  TrailingBytes,
  DegenerateGeometry,
  TooFewPairs,
  MissingVelocity,
  DeltaTooLarge,
  DuplicateTimestamps,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotSkewSymmetric: return "NotSkewSymmetric";
    case ErrorCode::InvalidRotation: return "InvalidRotation";
    case ErrorCode::DegenerateDomain: return "DegenerateDomain";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::Underdetermined: return "Underdetermined";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::DenormalizedQuaternion: return "DenormalizedQuaternion";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::MissingVelocity: return "MissingVelocity";
    case ErrorCode::DeltaTooLarge: return "DeltaTooLarge";
    case ErrorCode::DuplicateTimestamps: return "DuplicateTimestamps";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception thrown by every fallible operation in the library.
///
/// `line()` is set for errors tied to a particular line of a text input
/// (1-based).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(compose(code, message, line)), code_(code), line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  static std::string compose(ErrorCode code, const std::string& message,
                             std::optional<std::size_t> line) {
    std::string out(to_string(code));
    if (line) out += " (line " + std::to_string(*line) + ")";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  ErrorCode code_;
  std::optional<std::size_t> line_;
};

}  // namespace stateval
