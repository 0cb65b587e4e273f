#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "posefuse/image.hpp"
#include "posefuse/skeleton.hpp"

namespace posefuse {

struct GeneratorRequest {
  std::vector<std::filesystem::path> reference_frame_paths;
  Pose2DSequence guidance;  // in the generator schema
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  int image_width = 1000;
  int image_height = 1000;
};

// Simulated 2D detector error. Distances are in pixels of the 2000-px-wide
// normalized plane and are rescaled to the real image width when applied.
struct DetectorNoiseConfig {
  double gaussian_sigma = 14.0;
  double outlier_prob = 0.05;
  double outlier_radius_min = 30.0;
  double outlier_radius_max = 120.0;
  double miss_prob = 0.01;  // confidence 0.1, position frozen at previous frame
  std::uint64_t seed = 0;

  void validate() const;
  static DetectorNoiseConfig zero() { return {0.0, 0.0, 30.0, 120.0, 0.0, 0}; }
};

DetectorNoiseConfig noise_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DetectorNoiseConfig& cfg);

// Emulates generator artifacts: with failure_prob a whole sequence renders
// with an AR(1) joint drift of stationary std pose_drift_sigma (normalized px).
struct CorruptionKnob {
  double pose_drift_sigma = 0.0;
  double drift_correlation = 0.0;
  double failure_prob = 0.0;

  void validate() const;
};

CorruptionKnob knob_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorruptionKnob& knob);

inline constexpr const char* kSidecarName = "truth.pseq";

std::string frame_file_name(std::size_t index);
// Sorted frame_%06d.png files in `dir`.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

// Exact marker colour of joint j; fully saturated so it cannot collide with
// the neutral bone colour.
Rgb marker_color(std::size_t joint, std::size_t joint_count);

class GeneratorAdapter {
 public:
  virtual ~GeneratorAdapter() = default;
  virtual std::string name() const = 0;
  virtual const JointSchema& schema() const = 0;
  // Writes frame_%06d.png files into req.output_dir.
  virtual void run(const GeneratorRequest& req) const = 0;
};

class MockGenerator : public GeneratorAdapter {
 public:
  MockGenerator(SchemaPtr schema, CorruptionKnob knob);
  std::string name() const override { return "mock"; }
  const JointSchema& schema() const override { return *schema_; }
  void run(const GeneratorRequest& req) const override;

  // Guidance positions after the drift process; what the frames show.
  Pose2DSequence realize(const GeneratorRequest& req) const;

 private:
  SchemaPtr schema_;
  CorruptionKnob knob_;
};

// Runs `command <request.json>`; exit code 0 means success.
class ExternalGenerator : public GeneratorAdapter {
 public:
  ExternalGenerator(std::string command, SchemaPtr schema);
  std::string name() const override { return "external"; }
  const JointSchema& schema() const override { return *schema_; }
  void run(const GeneratorRequest& req) const override;

 private:
  std::string command_;
  SchemaPtr schema_;
};

/// Runs the adapter and checks its output: one readable PNG per guidance
/// frame. Errors: AdapterFailure, FrameCountMismatch, UnreadableOutput.
std::filesystem::path generate(const GeneratorRequest& req, const GeneratorAdapter& adapter);
std::filesystem::path mock_generate(const GeneratorRequest& req, const CorruptionKnob& knob);

class DetectorAdapter {
 public:
  virtual ~DetectorAdapter() = default;
  virtual std::string name() const = 0;
  virtual const JointSchema& schema() const = 0;
  virtual Pose2DSequence run(const std::filesystem::path& frames_dir,
                             const std::vector<std::filesystem::path>& frames) const = 0;
};

// Locates the mock renderer's colour-coded joint markers, then applies the
// simulated detector noise. Markers that are not visible keep the previous
// frame's position with confidence 0.
class MarkerDetector : public DetectorAdapter {
 public:
  MarkerDetector(SchemaPtr schema, DetectorNoiseConfig noise);
  std::string name() const override { return "synthetic"; }
  const JointSchema& schema() const override { return *schema_; }
  Pose2DSequence run(const std::filesystem::path& frames_dir,
                     const std::vector<std::filesystem::path>& frames) const override;

  // Marker centroids only, no noise.
  Pose2DSequence locate(const std::vector<std::filesystem::path>& frames, int* width) const;

 private:
  SchemaPtr schema_;
  DetectorNoiseConfig noise_;
};

// Runs `command <request.json>` and reads the keypoints file it writes.
class ExternalDetector : public DetectorAdapter {
 public:
  ExternalDetector(std::string command, SchemaPtr schema, std::uint64_t seed);
  std::string name() const override { return "external"; }
  const JointSchema& schema() const override { return *schema_; }
  Pose2DSequence run(const std::filesystem::path& frames_dir,
                     const std::vector<std::filesystem::path>& frames) const override;

 private:
  std::string command_;
  SchemaPtr schema_;
  std::uint64_t seed_;
};

/// Errors: MissingInput for a missing/empty frame directory, SchemaMismatch
/// or ShapeMismatch for an inconsistent reply.
Pose2DSequence detect(const std::filesystem::path& frames_dir, const DetectorAdapter& adapter);

/// Gaussian noise plus uniform-direction outliers and misses, deterministic in
/// cfg.seed. Joints with zero confidence pass through untouched.
Pose2DSequence synth_detect(const Pose2DSequence& truth, const DetectorNoiseConfig& cfg,
                            int image_width);

}  // namespace posefuse
