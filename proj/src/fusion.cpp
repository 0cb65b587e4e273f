#include "posefuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "posefuse/error.hpp"
#include "posefuse/rng.hpp"

namespace posefuse {

namespace {

constexpr double kUnitTolerance = 1e-6;

std::optional<Eigen::Vector3d> horizontal_unit(const Eigen::Vector3d& v) {
  const Eigen::Vector3d flat = v - v.dot(kWorldUp) * kWorldUp;
  const double n = flat.norm();
  if (n < kUnitTolerance * std::max(1.0, v.norm())) return std::nullopt;
  return flat / n;
}

}  // namespace

void SceneSample::validate() const {
  if (reference_frame_paths.empty())
    throw Error(ErrorCode::Validation, "scene " + dataset_id + "." + sample_id +
                                           " needs at least one reference frame");
  if (std::abs(facing.norm() - 1.0) > kUnitTolerance)
    throw Error(ErrorCode::Validation,
                "scene " + dataset_id + "." + sample_id + " facing direction is not unit-norm");
  if (!root_position.allFinite() || !std::isfinite(ground_height))
    throw Error(ErrorCode::Validation, "scene " + dataset_id + "." + sample_id +
                                           " has non-finite root or ground");
  camera.validate();
}

std::vector<Eigen::Vector3d> MotionSample::root_trajectory() const {
  std::vector<Eigen::Vector3d> out;
  out.reserve(motion.frames());
  for (std::size_t t = 0; t < motion.frames(); ++t)
    out.push_back(motion(t, motion.schema().root_index));
  return out;
}

void AlignmentTransform::validate() const {
  const double ortho =
      (rotation_w * rotation_w.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kUnitTolerance || std::abs(rotation_w.determinant() - 1.0) > kUnitTolerance)
    throw Error(ErrorCode::InvalidInput, "alignment rotation is not a proper rotation");
  if ((rotation_w * kWorldUp - kWorldUp).norm() > kUnitTolerance)
    throw Error(ErrorCode::InvalidInput, "alignment rotation does not fix the gravity axis");
}

std::optional<Eigen::Vector3d> facing_direction(const Pose3DSequence& pose, std::size_t frame) {
  const auto left = pose.schema().find("left_hip");
  const auto right = pose.schema().find("right_hip");
  if (!left || !right) return std::nullopt;
  const Eigen::Vector3d hips = pose(frame, *left) - pose(frame, *right);
  const double n = hips.norm();
  if (n == 0.0) return std::nullopt;
  // Hip vector within tolerance of vertical has no usable heading.
  if (hips.cross(kWorldUp).norm() / n < kUnitTolerance) return std::nullopt;
  return horizontal_unit(hips.cross(kWorldUp));
}

AlignmentResult compute_alignment(const Pose3DSequence& motion, const SceneSample& scene) {
  AlignmentResult result;
  auto& xf = result.transform;

  const auto motion_facing = facing_direction(motion, 0);
  const auto scene_facing = horizontal_unit(scene.facing);
  if (!motion_facing || !scene_facing) {
    result.warning = !motion_facing
                         ? "degenerate motion facing (hips vertical or missing); using identity rotation"
                         : "scene facing is vertical; using identity rotation";
  } else {
    const double sin_yaw = motion_facing->cross(*scene_facing).dot(kWorldUp);
    const double cos_yaw = motion_facing->dot(*scene_facing);
    const double yaw = std::atan2(sin_yaw, cos_yaw);
    // Re-normalizing an already-unit facing can leave a yaw of a few ulps.
    if (std::abs(yaw) > 8 * std::numeric_limits<double>::epsilon())
      xf.rotation_w = Eigen::AngleAxisd(yaw, kWorldUp).toRotationMatrix();
  }

  // Vertical coordinate is unchanged by a gravity-axis rotation, so ground
  // contact depends only on the root substitution.
  const auto& schema = motion.schema();
  std::vector<std::size_t> feet = schema.foot_indices;
  if (feet.empty())
    for (std::size_t j = 0; j < schema.size(); ++j) feet.push_back(j);
  const Eigen::Vector3d offset = scene.root_position - xf.rotation_w * motion(0, schema.root_index);
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < motion.frames(); ++t)
    for (auto f : feet) lowest = std::min(lowest, (xf.rotation_w * motion(t, f) + offset).z());
  xf.translation = Eigen::Vector3d(0.0, 0.0, scene.ground_height - lowest);
  return result;
}

Pose3DSequence align(const Pose3DSequence& motion, const SceneSample& scene,
                     const AlignmentTransform& xf) {
  if (motion.frame_tag() != FrameTag::World)
    throw Error(ErrorCode::InvalidInput, "align expects a world-frame motion");
  motion.check_finite();
  xf.validate();
  const Eigen::Vector3d root_b = motion(0, motion.schema().root_index);
  // Grouped so that W = I and root_b = root_a reproduce the input bit-for-bit.
  const Eigen::Vector3d shift = (scene.root_position - xf.rotation_w * root_b) + xf.translation;
  Pose3DSequence out(motion.schema_ptr(), motion.frames(), FrameTag::World);
  for (std::size_t t = 0; t < motion.frames(); ++t) {
    for (std::size_t j = 0; j < motion.joints(); ++j) {
      out(t, j) = xf.rotation_w * motion(t, j) + shift;
      if (!(scene.camera.to_camera(out(t, j)).z() > 0.0))
        throw Error(ErrorCode::Placement, "aligned joint " + std::to_string(j) + " at frame " +
                                              std::to_string(t) + " is behind the scene camera");
    }
  }
  return out;
}

Pose2DSequence make_guidance(const Pose3DSequence& gt_world, const CameraModel& cam,
                             const SchemaMapping& mapping) {
  return map_schema_2d(project(world_to_camera(gt_world, cam), cam), mapping);
}

void check_placement(const Pose3DSequence& gt_world, const CameraModel& cam,
                     double max_outside_fraction) {
  std::size_t outside = 0;
  for (std::size_t t = 0; t < gt_world.frames(); ++t) {
    for (std::size_t j = 0; j < gt_world.joints(); ++j) {
      const Eigen::Vector3d p = cam.to_camera(gt_world(t, j));
      if (!(p.z() > 0.0))
        throw Error(ErrorCode::Placement, "joint " + std::to_string(j) + " at frame " +
                                              std::to_string(t) + " is behind the camera");
      if (!cam.in_image(cam.project_point(p))) ++outside;
    }
  }
  const double fraction =
      static_cast<double>(outside) / static_cast<double>(gt_world.frames() * gt_world.joints());
  if (fraction > max_outside_fraction)
    throw Error(ErrorCode::Placement, std::to_string(fraction * 100.0) +
                                          "% of joints project outside the image");
}

std::string fused_sample_id(const SceneSample& scene, const MotionSample& motion) {
  return scene.dataset_id + "." + scene.sample_id + "+" + motion.dataset_id + "." +
         motion.sample_id;
}

PairingPolicy::Mode pairing_mode_from_string(std::string_view s) {
  if (s == "all") return PairingPolicy::Mode::AllPairs;
  if (s == "cross") return PairingPolicy::Mode::CrossOnly;
  if (s == "in-domain") return PairingPolicy::Mode::InDomainOnly;
  throw Error(ErrorCode::InvalidInput,
              "unknown pairing mode '" + std::string(s) + "' (all, cross, in-domain)");
}

std::string_view to_string(PairingPolicy::Mode mode) {
  switch (mode) {
    case PairingPolicy::Mode::AllPairs: return "all";
    case PairingPolicy::Mode::CrossOnly: return "cross";
    case PairingPolicy::Mode::InDomainOnly: return "in-domain";
  }
  return "all";
}

std::vector<PairSpec> plan_pairs(const std::vector<SceneSample>& scenes,
                                 const std::vector<MotionSample>& motions,
                                 const PairingPolicy& policy) {
  if (scenes.empty() || motions.empty())
    throw Error(ErrorCode::EmptyCorpus, "fusion needs at least one scene and one motion");
  std::vector<PairSpec> pairs;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (std::size_t m = 0; m < motions.size(); ++m) {
      const bool same_dataset = scenes[s].dataset_id == motions[m].dataset_id;
      if (same_dataset && scenes[s].sample_id == motions[m].sample_id) continue;
      if (policy.mode == PairingPolicy::Mode::CrossOnly && same_dataset) continue;
      if (policy.mode == PairingPolicy::Mode::InDomainOnly && !same_dataset) continue;
      pairs.push_back({s, m, fused_sample_id(scenes[s], motions[m])});
    }
  }
  if (policy.subsample && *policy.subsample < pairs.size()) {
    // Partial Fisher-Yates, then restore scene-major order.
    Rng rng(policy.seed);
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < *policy.subsample; ++i)
      std::swap(order[i], order[i + rng.below(order.size() - i)]);
    order.resize(*policy.subsample);
    std::sort(order.begin(), order.end());
    std::vector<PairSpec> picked;
    for (auto i : order) picked.push_back(pairs[i]);
    pairs = std::move(picked);
  }
  if (pairs.empty())
    throw Error(ErrorCode::EmptyCorpus, "pairing policy '" + std::string(to_string(policy.mode)) +
                                            "' leaves no samples");
  return pairs;
}

FusedOutcome fuse_sample(const SceneSample& scene, const MotionSample& motion, std::string id,
                         const FusionOptions& options) {
  FusedOutcome outcome;
  try {
    scene.validate();
    const Pose3DSequence corrected = motion.corrected();
    auto alignment = compute_alignment(corrected, scene);
    if (alignment.warning) outcome.warnings.push_back(id + ": " + *alignment.warning);
    Pose3DSequence world = align(corrected, scene, alignment.transform);
    check_placement(world, scene.camera, options.max_outside_fraction);
    Pose3DSequence camera = world_to_camera(world, scene.camera);
    Pose2DSequence guidance = map_schema_2d(project(camera, scene.camera), options.guidance_mapping);
    outcome.sample.emplace(FusedSample{
        .id = std::move(id),
        .scene_ref = {scene.dataset_id, scene.sample_id},
        .motion_ref = {motion.dataset_id, motion.sample_id},
        .camera = scene.camera,
        .reference_frames = scene.reference_frame_paths,
        .alignment = alignment.transform,
        .gt_3d_world = std::move(world),
        .gt_3d_camera = std::move(camera),
        .guidance_2d = std::move(guidance),
        .generated_frames_path = std::nullopt,
        .detected_2d = std::nullopt,
        .quality_score = std::nullopt,
    });
  } catch (const Error& e) {
    outcome.rejection = std::string(to_string(e.code())) + ": " + e.what();
  }
  return outcome;
}

FuseResult cross_fuse(const std::vector<SceneSample>& scenes,
                      const std::vector<MotionSample>& motions, const PairingPolicy& policy,
                      const FusionOptions& options) {
  FuseResult result;
  for (const auto& pair : plan_pairs(scenes, motions, policy)) {
    auto outcome =
        fuse_sample(scenes[pair.scene_index], motions[pair.motion_index], pair.id, options);
    for (auto& w : outcome.warnings) result.warnings.push_back(std::move(w));
    if (outcome.sample)
      result.samples.push_back(std::move(*outcome.sample));
    else
      result.rejected.emplace_back(pair.id, outcome.rejection);
  }
  return result;
}

}  // namespace posefuse
