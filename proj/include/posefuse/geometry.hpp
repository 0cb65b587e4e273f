#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "json.hpp"
#include "posefuse/skeleton.hpp"

namespace posefuse {

// Right-handed camera frame, +Z forward, image origin top-left, v downward.
inline constexpr std::string_view kCameraConvention = "rh-z-forward";

// 2D errors are reported in a camera plane rescaled to this width.
inline constexpr double kNormalizedWidth = 2000.0;

// Pure pinhole: no distortion terms.
struct CameraModel {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();   // mm, camera frame
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 500.0;
  double cy = 500.0;
  int image_width = 1000;
  int image_height = 1000;

  // Throws Validation on a non-rotation, non-positive focal length or an
  // out-of-image principal point.
  void validate() const;

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const {
    return rotation * world + translation;
  }
  Eigen::Vector2d project_point(const Eigen::Vector3d& cam) const {
    return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
  }
  bool in_image(const Eigen::Vector2d& uv) const {
    return uv.x() >= 0.0 && uv.y() >= 0.0 && uv.x() < image_width && uv.y() < image_height;
  }

  // Camera at `eye` looking at `target`, with `up` the world vertical.
  static CameraModel look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                             const Eigen::Vector3d& up, double focal, int width, int height);
};

struct HandednessCorrection {
  std::optional<int> flip_axis;  // 0, 1 or 2
};

Pose3DSequence world_to_camera(const Pose3DSequence& pose, const CameraModel& cam);

// Throws BehindCameraError for any joint with z <= 0.
Pose2DSequence project(const Pose3DSequence& pose, const CameraModel& cam);

Pose3DSequence apply_handedness(Pose3DSequence pose, const HandednessCorrection& corr);

double normalization_scale(const CameraModel& cam);
Pose2DSequence normalize_2d(const Pose2DSequence& kps, const CameraModel& cam);

CameraModel camera_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CameraModel& cam);
CameraModel load_camera(const std::filesystem::path& path);

HandednessCorrection handedness_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HandednessCorrection& corr);

}  // namespace posefuse
