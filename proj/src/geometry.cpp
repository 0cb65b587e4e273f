#include "posefuse/geometry.hpp"

#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "posefuse/error.hpp"

namespace posefuse {

namespace {

constexpr double kRotationTolerance = 1e-6;

[[noreturn]] void bad_camera(const std::string& msg) {
  throw Error(ErrorCode::Validation, "invalid camera: " + msg);
}

}  // namespace

void CameraModel::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) bad_camera("non-finite extrinsics");
  const double ortho = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  if (ortho > kRotationTolerance) bad_camera("rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > kRotationTolerance)
    bad_camera("rotation determinant is not +1");
  if (!(fx > 0.0) || !(fy > 0.0)) bad_camera("focal lengths must be positive");
  if (image_width <= 0 || image_height <= 0) bad_camera("image size must be positive");
  if (!(cx >= 0.0 && cx < image_width) || !(cy >= 0.0 && cy < image_height))
    bad_camera("principal point outside the image");
}

CameraModel CameraModel::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                                 const Eigen::Vector3d& up, double focal, int width,
                                 int height) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  CameraModel cam;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * eye;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.image_width = width;
  cam.image_height = height;
  return cam;
}

Pose3DSequence world_to_camera(const Pose3DSequence& pose, const CameraModel& cam) {
  if (pose.frame_tag() != FrameTag::World)
    throw Error(ErrorCode::InvalidInput, "world_to_camera expects a world-frame pose");
  pose.check_finite();
  Pose3DSequence out(pose.schema_ptr(), pose.frames(), FrameTag::Camera);
  for (std::size_t t = 0; t < pose.frames(); ++t)
    for (std::size_t j = 0; j < pose.joints(); ++j) out(t, j) = cam.to_camera(pose(t, j));
  return out;
}

Pose2DSequence project(const Pose3DSequence& pose, const CameraModel& cam) {
  if (pose.frame_tag() != FrameTag::Camera)
    throw Error(ErrorCode::InvalidInput, "project expects a camera-frame pose");
  pose.check_finite();
  Pose2DSequence out(pose.schema_ptr(), pose.frames());
  for (std::size_t t = 0; t < pose.frames(); ++t) {
    for (std::size_t j = 0; j < pose.joints(); ++j) {
      const auto& p = pose(t, j);
      if (!(p.z() > 0.0)) throw BehindCameraError(t, j, p.z());
      out(t, j) = cam.project_point(p);
      out.confidence(t, j) = 1.0;
    }
  }
  return out;
}

Pose3DSequence apply_handedness(Pose3DSequence pose, const HandednessCorrection& corr) {
  if (!corr.flip_axis) return pose;
  const int axis = *corr.flip_axis;
  if (axis < 0 || axis > 2)
    throw Error(ErrorCode::InvalidInput, "handedness flip axis must be 0, 1 or 2");
  for (std::size_t t = 0; t < pose.frames(); ++t)
    for (std::size_t j = 0; j < pose.joints(); ++j) pose(t, j)[axis] = -pose(t, j)[axis];
  return pose;
}

double normalization_scale(const CameraModel& cam) {
  if (cam.image_width <= 0) bad_camera("image width must be positive");
  return kNormalizedWidth / cam.image_width;
}

Pose2DSequence normalize_2d(const Pose2DSequence& kps, const CameraModel& cam) {
  const double s = normalization_scale(cam);
  Pose2DSequence out = kps;
  for (std::size_t t = 0; t < kps.frames(); ++t)
    for (std::size_t j = 0; j < kps.joints(); ++j) out(t, j) = s * kps(t, j);
  return out;
}

CameraModel camera_from_json(const nlohmann::json& j) {
  CameraModel cam;
  try {
    if (j.contains("convention") && j.at("convention").get<std::string>() != kCameraConvention)
      bad_camera("unsupported convention '" + j.at("convention").get<std::string>() + "'");
    const auto r = j.at("rotation").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    if (r.size() != 9) bad_camera("rotation needs 9 numbers");
    if (t.size() != 3) bad_camera("translation needs 3 numbers");
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col) cam.rotation(row, col) = r[row * 3 + col];
    cam.translation = Eigen::Vector3d(t[0], t[1], t[2]);
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.image_width = j.at("image_width").get<int>();
    cam.image_height = j.at("image_height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    bad_camera(std::string("malformed JSON: ") + e.what());
  }
  cam.validate();
  return cam;
}

nlohmann::json to_json(const CameraModel& cam) {
  std::vector<double> r(9);
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) r[row * 3 + col] = cam.rotation(row, col);
  return {{"rotation", r},
          {"translation", {cam.translation.x(), cam.translation.y(), cam.translation.z()}},
          {"fx", cam.fx},
          {"fy", cam.fy},
          {"cx", cam.cx},
          {"cy", cam.cy},
          {"image_width", cam.image_width},
          {"image_height", cam.image_height},
          {"convention", kCameraConvention}};
}

CameraModel load_camera(const std::filesystem::path& path) {
  return camera_from_json(read_json_file(path));
}

HandednessCorrection handedness_from_json(const nlohmann::json& j) {
  HandednessCorrection corr;
  if (j.is_null()) return corr;
  const auto& axis = j.is_object() ? j.value("flip_axis", nlohmann::json()) : j;
  if (axis.is_null()) return corr;
  const int a = axis.get<int>();
  if (a < 0 || a > 2) throw Error(ErrorCode::InvalidInput, "flip_axis must be 0, 1 or 2");
  corr.flip_axis = a;
  return corr;
}

nlohmann::json to_json(const HandednessCorrection& corr) {
  return {{"flip_axis", corr.flip_axis ? nlohmann::json(*corr.flip_axis) : nlohmann::json()}};
}

}  // namespace posefuse
