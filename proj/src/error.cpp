#include "posefuse/error.hpp"

namespace posefuse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::BehindCamera: return "behind-camera";
    case ErrorCode::SchemaMismatch: return "schema-mismatch";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::Placement: return "placement";
    case ErrorCode::EmptyCorpus: return "empty-corpus";
    case ErrorCode::AdapterFailure: return "adapter-failure";
    case ErrorCode::FrameCountMismatch: return "frame-count-mismatch";
    case ErrorCode::UnreadableOutput: return "unreadable-output";
    case ErrorCode::MissingInput: return "missing-input";
    case ErrorCode::RankDeficient: return "rank-deficient";
    case ErrorCode::BadMagic: return "bad-magic";
    case ErrorCode::Truncated: return "truncated";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::FormatError: return "format-error";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::MissingChannel: return "missing-channel";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

BehindCameraError::BehindCameraError(std::size_t frame, std::size_t joint, double depth)
    : Error(ErrorCode::BehindCamera,
            "joint behind camera at frame " + std::to_string(frame) + ", joint " +
                std::to_string(joint) + " (z = " + std::to_string(depth) + " mm)"),
      frame_(frame),
      joint_(joint) {}

}  // namespace posefuse
