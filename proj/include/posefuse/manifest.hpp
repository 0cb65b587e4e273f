#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "posefuse/fusion.hpp"
#include "posefuse/geometry.hpp"
#include "posefuse/skeleton.hpp"

namespace posefuse {

inline constexpr int kManifestVersion = 1;

// Stage progression; Kept, FilteredOut, Failed and Rejected are terminal.
enum class SampleStatus { Fused, Generated, Detected, Scored, Kept, FilteredOut, Failed, Rejected };

std::string_view to_string(SampleStatus status);
SampleStatus sample_status_from_string(std::string_view s);
// Position in the stage order; terminal failure states rank lowest.
int stage_rank(SampleStatus status);

// Path relative to the manifest directory.
struct FileEntry {
  std::string path;
  std::string sha256;
  bool operator==(const FileEntry&) const = default;
};

// Manifest file roles.
inline constexpr const char* kGtWorldFile = "gt_3d_world";
inline constexpr const char* kGtCameraFile = "gt_3d_camera";
inline constexpr const char* kGuidanceFile = "guidance_2d";
inline constexpr const char* kDetectedFile = "detected_2d";
inline constexpr const char* kGeneratorTruthFile = "generator_truth";

struct ManifestSample {
  std::string id;
  SampleStatus status = SampleStatus::Fused;
  std::string reason;  // failure or rejection cause
  SampleRef scene_ref;
  SampleRef motion_ref;
  std::optional<CameraModel> camera;
  std::optional<AlignmentTransform> alignment;
  std::vector<std::string> reference_frames;
  std::map<std::string, FileEntry> files;
  std::vector<FileEntry> frames;
  std::optional<double> score;
  std::vector<std::string> warnings;

  bool cross_domain() const { return scene_ref.dataset != motion_ref.dataset; }
  const FileEntry& file(const std::string& role) const;
};

struct SourceDatasetInfo {
  std::string dataset_id;
  std::string schema;
  HandednessCorrection handedness;
};

struct Manifest {
  int version = kManifestVersion;
  std::string convention{kCameraConvention};
  std::string created_at;  // ignored by comparisons
  std::string config_digest;
  std::vector<SourceDatasetInfo> source_datasets;
  nlohmann::json guidance_mapping;
  std::vector<ManifestSample> samples;  // sorted by id

  const ManifestSample* find(std::string_view id) const;
  ManifestSample* find(std::string_view id);
  void sort_samples();
  std::size_t count(SampleStatus status) const;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

// Hashes `file`, storing its path relative to `root`.
FileEntry make_file_entry(const std::filesystem::path& root, const std::filesystem::path& file);
// The file exists under `root` and its hash matches.
bool verify_file_entry(const std::filesystem::path& root, const FileEntry& entry);

nlohmann::json to_json(const Manifest& manifest, bool with_timestamp = true);
Manifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::filesystem::path& path, Manifest manifest);
Manifest read_manifest(const std::filesystem::path& path);
std::string utc_timestamp();

struct ValidationIssue {
  std::string sample_id;  // empty for manifest-level problems
  std::string message;
};

/// Checks unique ids, every referenced file (existence and hash), and, for
/// kept samples, that the stored guidance re-derives from the stored
/// camera-frame ground truth within float32 storage precision.
std::vector<ValidationIssue> validate_manifest(const Manifest& manifest,
                                               const std::filesystem::path& root,
                                               const SchemaRegistry& registry);

}  // namespace posefuse
