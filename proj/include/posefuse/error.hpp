#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace posefuse {

enum class ErrorCode {
  InvalidInput,
  BehindCamera,
  SchemaMismatch,
  ShapeMismatch,
  Placement,
  EmptyCorpus,
  AdapterFailure,
  FrameCountMismatch,
  UnreadableOutput,
  MissingInput,
  RankDeficient,
  BadMagic,
  Truncated,
  NonFinite,
  FormatError,
  Validation,
  MissingChannel,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every library failure is reported through this type so callers can branch on
// the code instead of parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by project() when a joint sits at or behind the image plane.
class BehindCameraError : public Error {
 public:
  BehindCameraError(std::size_t frame, std::size_t joint, double depth);

  std::size_t frame() const noexcept { return frame_; }
  std::size_t joint() const noexcept { return joint_; }

 private:
  std::size_t frame_;
  std::size_t joint_;
};

}  // namespace posefuse
