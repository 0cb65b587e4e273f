#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "posefuse/geometry.hpp"
#include "posefuse/skeleton.hpp"

namespace posefuse {

// World frames are Z-up; ground heights are Z values.
inline const Eigen::Vector3d kWorldUp{0.0, 0.0, 1.0};

struct SceneSample {
  std::string dataset_id;
  std::string sample_id;
  std::vector<std::filesystem::path> reference_frame_paths;
  CameraModel camera;
  Eigen::Vector3d root_position = Eigen::Vector3d::Zero();  // mm, world
  Eigen::Vector3d facing = Eigen::Vector3d::UnitY();        // unit
  double ground_height = 0.0;                               // mm

  void validate() const;
};

struct MotionSample {
  std::string dataset_id;
  std::string sample_id;
  Pose3DSequence motion;  // world frame, as stored by the source dataset
  HandednessCorrection handedness;

  // Motion with the dataset handedness correction applied.
  Pose3DSequence corrected() const { return apply_handedness(motion, handedness); }
  std::vector<Eigen::Vector3d> root_trajectory() const;
};

// Gravity-axis rotation plus the residual translation left after Eq. 2's
// root substitution (the vertical ground-contact offset).
struct AlignmentTransform {
  Eigen::Matrix3d rotation_w = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate() const;
};

struct AlignmentResult {
  AlignmentTransform transform;
  std::optional<std::string> warning;
};

/// Horizontal facing of a pose at `frame`: (left_hip - right_hip) x up,
/// flattened onto the ground. Empty when the hips are (nearly) vertical or the
/// schema has no hips.
std::optional<Eigen::Vector3d> facing_direction(const Pose3DSequence& pose, std::size_t frame = 0);

/// Yaw that turns the motion's frame-0 facing onto the scene facing, and a
/// vertical offset putting the lowest foot (over all frames) on the ground.
/// `motion` must already be handedness-corrected.
AlignmentResult compute_alignment(const Pose3DSequence& motion, const SceneSample& scene);

/// p' = W (p - root_b(0)) + root_a + residual. Throws Placement when any
/// joint lands behind the scene camera.
Pose3DSequence align(const Pose3DSequence& motion, const SceneSample& scene,
                     const AlignmentTransform& xf);

/// Guidance keypoints: map(project(world_to_camera(gt))).
Pose2DSequence make_guidance(const Pose3DSequence& gt_world, const CameraModel& cam,
                             const SchemaMapping& mapping);

/// Rejects placements with joints behind the camera or more than
/// `max_outside_fraction` of joint-frames projecting outside the image.
void check_placement(const Pose3DSequence& gt_world, const CameraModel& cam,
                     double max_outside_fraction);

struct SampleRef {
  std::string dataset;
  std::string sample;
  bool operator==(const SampleRef&) const = default;
};

struct FusedSample {
  std::string id;
  SampleRef scene_ref;
  SampleRef motion_ref;
  CameraModel camera;
  std::vector<std::filesystem::path> reference_frames;
  AlignmentTransform alignment;
  Pose3DSequence gt_3d_world;
  Pose3DSequence gt_3d_camera;
  Pose2DSequence guidance_2d;
  std::optional<std::filesystem::path> generated_frames_path;
  std::optional<Pose2DSequence> detected_2d;
  std::optional<double> quality_score;

  bool cross_domain() const { return scene_ref.dataset != motion_ref.dataset; }
};

std::string fused_sample_id(const SceneSample& scene, const MotionSample& motion);

struct PairingPolicy {
  enum class Mode { AllPairs, CrossOnly, InDomainOnly };
  Mode mode = Mode::AllPairs;
  std::optional<std::size_t> subsample;  // keep K pairs chosen with `seed`
  std::uint64_t seed = 0;
};

PairingPolicy::Mode pairing_mode_from_string(std::string_view s);
std::string_view to_string(PairingPolicy::Mode mode);

struct PairSpec {
  std::size_t scene_index;
  std::size_t motion_index;
  std::string id;
};

/// Scene-major pair list after policy filtering; self-pairs never appear.
/// Throws EmptyCorpus when nothing survives.
std::vector<PairSpec> plan_pairs(const std::vector<SceneSample>& scenes,
                                 const std::vector<MotionSample>& motions,
                                 const PairingPolicy& policy);

struct FusionOptions {
  SchemaMapping guidance_mapping;
  double max_outside_fraction = 0.2;
};

struct FusedOutcome {
  std::optional<FusedSample> sample;
  std::string rejection;  // set when sample is empty
  std::vector<std::string> warnings;
};

FusedOutcome fuse_sample(const SceneSample& scene, const MotionSample& motion, std::string id,
                         const FusionOptions& options);

struct FuseResult {
  std::vector<FusedSample> samples;
  std::vector<std::pair<std::string, std::string>> rejected;  // (id, reason)
  std::vector<std::string> warnings;
};

FuseResult cross_fuse(const std::vector<SceneSample>& scenes,
                      const std::vector<MotionSample>& motions, const PairingPolicy& policy,
                      const FusionOptions& options);

}  // namespace posefuse
