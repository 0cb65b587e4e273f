#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posefuse/skeleton.hpp"

namespace posefuse {

// PSEQ layout, all integers little-endian:
//   0  char[4]  "PSEQ"
//   4  u16      version (1)
//   6  u8       kind: 2 or 3 (coordinates per joint)
//   7  u8       flags: bit0 confidence block present (2D only),
//                      bit1 camera frame (3D only)
//   8  u32      T
//   12 u32      J
//   16 u16      schema name length n
//   18 u8[n]    schema name, UTF-8
//   ..  f32[T*J*kind]  positions, frame-major, joint-major, coordinate
//   ..  f32[T*J]       confidences, when flagged
inline constexpr std::uint16_t kPoseTensorVersion = 1;

struct PoseTensor {
  int kind = 3;
  bool camera_frame = false;
  std::uint32_t frames = 0;
  std::uint32_t joints = 0;
  std::string schema;
  std::vector<float> values;
  std::optional<std::vector<float>> confidence;
};

std::vector<std::uint8_t> encode_pose_tensor(const PoseTensor& tensor);
// Distinct errors: BadMagic, Truncated, NonFinite; FormatError for anything
// else malformed (version, kind, flags, trailing bytes).
PoseTensor decode_pose_tensor(std::span<const std::uint8_t> bytes);

void write_pose_tensor(const std::filesystem::path& path, const PoseTensor& tensor);
PoseTensor read_pose_tensor(const std::filesystem::path& path);

PoseTensor to_tensor(const Pose3DSequence& pose);
PoseTensor to_tensor(const Pose2DSequence& kps);
Pose3DSequence to_pose3d(const PoseTensor& tensor, const SchemaRegistry& registry);
Pose2DSequence to_pose2d(const PoseTensor& tensor, const SchemaRegistry& registry);

void write_pose(const std::filesystem::path& path, const Pose3DSequence& pose);
void write_pose(const std::filesystem::path& path, const Pose2DSequence& kps);
Pose3DSequence read_pose3d(const std::filesystem::path& path, const SchemaRegistry& registry);
Pose2DSequence read_pose2d(const std::filesystem::path& path, const SchemaRegistry& registry);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace posefuse
