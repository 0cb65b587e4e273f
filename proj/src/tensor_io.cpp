#include "posefuse/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "posefuse/error.hpp"

namespace posefuse {

namespace {

constexpr std::uint8_t kFlagConfidence = 0x1;
constexpr std::uint8_t kFlagCamera = 0x2;
constexpr std::size_t kFixedHeader = 18;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

[[noreturn]] void format_error(const std::string& msg) {
  throw Error(ErrorCode::FormatError, "pose tensor: " + msg);
}

void check_shape(const PoseTensor& t) {
  if (t.kind != 2 && t.kind != 3) format_error("kind must be 2 or 3");
  const std::size_t n = static_cast<std::size_t>(t.frames) * t.joints;
  if (t.values.size() != n * t.kind) format_error("value count does not match dimensions");
  if (t.confidence && t.confidence->size() != n) format_error("confidence count mismatch");
  if (t.confidence && t.kind != 2) format_error("confidence block only allowed for 2D");
  if (t.camera_frame && t.kind != 3) format_error("camera-frame flag only allowed for 3D");
  if (t.schema.size() > 0xffff) format_error("schema name too long");
}

}  // namespace

std::vector<std::uint8_t> encode_pose_tensor(const PoseTensor& t) {
  check_shape(t);
  std::vector<std::uint8_t> out{'P', 'S', 'E', 'Q'};
  put_u16(out, kPoseTensorVersion);
  out.push_back(static_cast<std::uint8_t>(t.kind));
  std::uint8_t flags = 0;
  if (t.confidence) flags |= kFlagConfidence;
  if (t.camera_frame) flags |= kFlagCamera;
  out.push_back(flags);
  put_u32(out, t.frames);
  put_u32(out, t.joints);
  put_u16(out, static_cast<std::uint16_t>(t.schema.size()));
  out.insert(out.end(), t.schema.begin(), t.schema.end());
  for (float v : t.values) put_f32(out, v);
  if (t.confidence)
    for (float v : *t.confidence) put_f32(out, v);
  return out;
}

PoseTensor decode_pose_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "PSEQ", 4) != 0)
    throw Error(ErrorCode::BadMagic, "pose tensor: bad magic");
  if (bytes.size() < kFixedHeader)
    throw Error(ErrorCode::Truncated, "pose tensor: truncated header");
  const std::uint8_t* p = bytes.data();
  if (get_u16(p + 4) != kPoseTensorVersion)
    format_error("unsupported version " + std::to_string(get_u16(p + 4)));
  PoseTensor t;
  t.kind = p[6];
  const std::uint8_t flags = p[7];
  if (t.kind != 2 && t.kind != 3) format_error("kind must be 2 or 3");
  if (flags & ~(kFlagConfidence | kFlagCamera)) format_error("unknown flag bits");
  t.camera_frame = flags & kFlagCamera;
  t.frames = get_u32(p + 8);
  t.joints = get_u32(p + 12);
  const std::size_t name_len = get_u16(p + 16);
  if (bytes.size() < kFixedHeader + name_len)
    throw Error(ErrorCode::Truncated, "pose tensor: truncated schema name");
  t.schema.assign(reinterpret_cast<const char*>(p + kFixedHeader), name_len);

  const std::size_t n = static_cast<std::size_t>(t.frames) * t.joints;
  const bool has_conf = flags & kFlagConfidence;
  if (n > bytes.size())
    throw Error(ErrorCode::Truncated, "pose tensor: payload shorter than declared dimensions");
  const std::size_t payload = n * t.kind * 4 + (has_conf ? n * 4 : 0);
  const std::size_t offset = kFixedHeader + name_len;
  if (bytes.size() - offset < payload)
    throw Error(ErrorCode::Truncated, "pose tensor: payload has " +
                                          std::to_string(bytes.size() - offset) + " of " +
                                          std::to_string(payload) + " bytes");
  if (bytes.size() - offset > payload) format_error("trailing bytes after payload");

  auto read_floats = [&](std::size_t at, std::size_t count) {
    std::vector<float> v(count);
    for (std::size_t i = 0; i < count; ++i) {
      v[i] = std::bit_cast<float>(get_u32(p + at + 4 * i));
      if (!std::isfinite(v[i]))
        throw Error(ErrorCode::NonFinite, "pose tensor: non-finite value at index " +
                                              std::to_string(i));
    }
    return v;
  };
  t.values = read_floats(offset, n * t.kind);
  if (has_conf) t.confidence = read_floats(offset + n * t.kind * 4, n);
  check_shape(t);
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

void write_pose_tensor(const std::filesystem::path& path, const PoseTensor& tensor) {
  write_file_bytes(path, encode_pose_tensor(tensor));
}

PoseTensor read_pose_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_pose_tensor(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

PoseTensor to_tensor(const Pose3DSequence& pose) {
  PoseTensor t;
  t.kind = 3;
  t.camera_frame = pose.frame_tag() == FrameTag::Camera;
  t.frames = static_cast<std::uint32_t>(pose.frames());
  t.joints = static_cast<std::uint32_t>(pose.joints());
  t.schema = pose.schema().name;
  t.values.reserve(pose.data().size() * 3);
  for (const auto& p : pose.data())
    for (int k = 0; k < 3; ++k) t.values.push_back(static_cast<float>(p[k]));
  return t;
}

PoseTensor to_tensor(const Pose2DSequence& kps) {
  PoseTensor t;
  t.kind = 2;
  t.frames = static_cast<std::uint32_t>(kps.frames());
  t.joints = static_cast<std::uint32_t>(kps.joints());
  t.schema = kps.schema().name;
  t.values.reserve(kps.data().size() * 2);
  for (const auto& p : kps.data())
    for (int k = 0; k < 2; ++k) t.values.push_back(static_cast<float>(p[k]));
  t.confidence.emplace();
  for (double c : kps.confidences()) t.confidence->push_back(static_cast<float>(c));
  return t;
}

namespace {

SchemaPtr schema_for(const PoseTensor& t, const SchemaRegistry& registry) {
  auto schema = registry.get(t.schema);
  if (schema->size() != t.joints)
    throw Error(ErrorCode::SchemaMismatch, "pose tensor has " + std::to_string(t.joints) +
                                               " joints but schema " + t.schema + " has " +
                                               std::to_string(schema->size()));
  if (t.frames == 0) format_error("zero frames");
  return schema;
}

}  // namespace

Pose3DSequence to_pose3d(const PoseTensor& t, const SchemaRegistry& registry) {
  if (t.kind != 3) format_error("expected a 3D tensor");
  Pose3DSequence pose(schema_for(t, registry), t.frames,
                      t.camera_frame ? FrameTag::Camera : FrameTag::World);
  for (std::size_t t_ = 0; t_ < t.frames; ++t_)
    for (std::size_t j = 0; j < t.joints; ++j)
      for (int k = 0; k < 3; ++k) pose(t_, j)[k] = t.values[(t_ * t.joints + j) * 3 + k];
  return pose;
}

Pose2DSequence to_pose2d(const PoseTensor& t, const SchemaRegistry& registry) {
  if (t.kind != 2) format_error("expected a 2D tensor");
  Pose2DSequence kps(schema_for(t, registry), t.frames);
  for (std::size_t t_ = 0; t_ < t.frames; ++t_) {
    for (std::size_t j = 0; j < t.joints; ++j) {
      const std::size_t i = t_ * t.joints + j;
      kps(t_, j) = Eigen::Vector2d(t.values[i * 2], t.values[i * 2 + 1]);
      if (t.confidence) kps.confidence(t_, j) = (*t.confidence)[i];
    }
  }
  kps.check_valid();
  return kps;
}

void write_pose(const std::filesystem::path& path, const Pose3DSequence& pose) {
  write_pose_tensor(path, to_tensor(pose));
}

void write_pose(const std::filesystem::path& path, const Pose2DSequence& kps) {
  write_pose_tensor(path, to_tensor(kps));
}

Pose3DSequence read_pose3d(const std::filesystem::path& path, const SchemaRegistry& registry) {
  return to_pose3d(read_pose_tensor(path), registry);
}

Pose2DSequence read_pose2d(const std::filesystem::path& path, const SchemaRegistry& registry) {
  return to_pose2d(read_pose_tensor(path), registry);
}

}  // namespace posefuse
