#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include <Eigen/Geometry>

#include "posefuse/error.hpp"
#include "posefuse/geometry.hpp"
#include "posefuse/rng.hpp"
#include "posefuse/skeleton.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "posefuse-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline Eigen::Matrix3d random_rotation(posefuse::Rng& rng) {
  Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
  if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitZ();
  return Eigen::AngleAxisd(rng.uniform(-3.14159, 3.14159), axis.normalized()).toRotationMatrix();
}

inline Eigen::Matrix3d yaw(double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

inline posefuse::CameraModel random_camera(posefuse::Rng& rng) {
  posefuse::CameraModel cam;
  cam.rotation = random_rotation(rng);
  cam.translation = {rng.uniform(-2000, 2000), rng.uniform(-2000, 2000), rng.uniform(-2000, 2000)};
  cam.image_width = static_cast<int>(rng.uniform(320, 4000));
  cam.image_height = static_cast<int>(rng.uniform(240, 3000));
  cam.fx = rng.uniform(300, 3000);
  cam.fy = cam.fx * rng.uniform(0.95, 1.05);
  cam.cx = rng.uniform(0.3, 0.7) * cam.image_width;
  cam.cy = rng.uniform(0.3, 0.7) * cam.image_height;
  return cam;
}

inline posefuse::Pose3DSequence random_pose(posefuse::Rng& rng, std::size_t frames,
                                            posefuse::FrameTag tag = posefuse::FrameTag::World,
                                            posefuse::SchemaPtr schema = posefuse::h36m17(),
                                            double spread = 1000.0) {
  posefuse::Pose3DSequence p(schema, frames, tag);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < p.joints(); ++j)
      p(t, j) = {rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                 rng.uniform(-spread, spread)};
  return p;
}

inline posefuse::Pose2DSequence random_kps(posefuse::Rng& rng, std::size_t frames,
                                           posefuse::SchemaPtr schema, double extent) {
  posefuse::Pose2DSequence k(schema, frames);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < k.joints(); ++j)
      k(t, j) = {rng.uniform(0, extent), rng.uniform(0, extent)};
  return k;
}

template <typename F>
posefuse::ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const posefuse::Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected a posefuse::Error");
}

}  // namespace testing
