#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "posefuse/fusion.hpp"
#include "posefuse/lifter.hpp"
#include "posefuse/manifest.hpp"
#include "posefuse/quality.hpp"
#include "posefuse/synth.hpp"

namespace posefuse {

inline constexpr const char* kManifestName = "manifest.json";

// One dataset's scenes and motions, described by a JSON file:
//   { "dataset_id": "A", "schema": "h36m-17", "handedness": {"flip_axis": null},
//     "scenes":  [{"id", "camera", "reference_frames", "root_position",
//                  "facing", "ground_height"}],
//     "motions": [{"id", "file"}] }
// "camera" is inline JSON or a path; all paths are relative to the file.
struct SourceSet {
  std::string dataset_id;
  SchemaPtr schema;
  HandednessCorrection handedness;
  std::vector<SceneSample> scenes;
  std::vector<MotionSample> motions;
};

SourceSet load_source_set(const std::filesystem::path& path, const SchemaRegistry& registry);

struct GeneratorConfig {
  std::string type = "mock";  // mock | external
  CorruptionKnob knob;
  std::string command;
};

struct DetectorConfig {
  std::string type = "synthetic";  // synthetic | external
  DetectorNoiseConfig noise;
  std::string command;
};

struct PipelineConfig {
  std::vector<std::filesystem::path> sources;
  PairingPolicy pairing;
  std::string guidance_mapping = "builtin:h36m-17->coco-body";
  GeneratorConfig generator;
  DetectorConfig detector;
  double filter_fraction = 0.10;
  double max_outside_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t workers = 1;  // never affects outputs

  void validate() const;
  // Everything that influences outputs; `workers` is left out.
  nlohmann::json to_json() const;
  std::string digest() const;
};

// Relative source paths resolve against `base_dir`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct StageStats {
  std::size_t processed = 0;
  std::size_t skipped = 0;  // outputs already present with matching hashes
  std::size_t failed = 0;
};

struct FilterOutcome {
  std::vector<std::string> kept_ids;  // score order
  ScoreSummary unfiltered;
  ScoreSummary filtered;
};

// Each stage reads <out>/manifest.json (fuse creates it), advances the
// samples it can, and writes the manifest back. Per-sample failures are
// recorded with a reason and never abort the stage.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::filesystem::path out_dir,
           SchemaRegistry registry = SchemaRegistry());

  StageStats fuse();
  StageStats generate();
  StageStats detect();
  StageStats score();
  FilterOutcome filter();

  const Manifest& manifest() const { return manifest_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::filesystem::path& out_dir() const { return out_; }

 private:
  void load_manifest();
  void save_manifest();
  template <typename Work>
  StageStats run_stage(SampleStatus from, SampleStatus to, const char* stage, Work&& work);

  PipelineConfig config_;
  std::filesystem::path out_;
  SchemaRegistry registry_;
  SchemaMapping mapping_;
  Manifest manifest_;
  std::vector<std::string> warnings_;
};

struct PipelineReport {
  Manifest manifest;
  std::size_t attempted = 0;
  std::size_t kept = 0;
  std::size_t filtered_out = 0;
  std::size_t failed = 0;
  std::size_t rejected = 0;
  std::size_t skipped = 0;  // summed over stages
  FilterOutcome filter;
  std::vector<std::string> warnings;
};

/// fuse -> generate -> detect -> score -> filter into `out_dir`. Throws
/// EmptyCorpus when every sample fails.
PipelineReport run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir,
                            const SchemaRegistry& registry = SchemaRegistry());

enum class Channel { GT, HPE };
Channel channel_from_string(std::string_view s);
std::string_view to_string(Channel c);

/// Writes <id>.input.pseq / <id>.target.pseq for every kept sample plus
/// index.json. Inputs are byte copies of the stored guidance (GT) or
/// detections (HPE); targets are the camera-frame ground truth. Throws
/// MissingChannel when a kept sample lacks the requested channel.
void export_training_set(const Manifest& manifest, const std::filesystem::path& manifest_dir,
                         Channel channel, const std::filesystem::path& out_dir);

struct TrainingSet {
  Channel channel = Channel::GT;
  std::vector<std::string> ids;
  std::vector<Pose2DSequence> inputs;
  std::vector<Pose3DSequence> targets;
  std::vector<int> image_widths;
};

TrainingSet load_training_set(const std::filesystem::path& dir, const SchemaRegistry& registry);

/// Regime corpus from the samples of a manifest that carry both channels
/// (kept samples only unless `include_filtered`).
RegimeCorpus regime_corpus_from_manifest(const Manifest& manifest,
                                         const std::filesystem::path& manifest_dir,
                                         const SchemaRegistry& registry,
                                         bool include_filtered = false);

}  // namespace posefuse
