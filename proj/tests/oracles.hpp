#pragma once

// Brute-force reference implementations. They share no code with the library
// beyond the container types.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Geometry>

#include "posefuse/geometry.hpp"
#include "posefuse/rng.hpp"
#include "posefuse/skeleton.hpp"
#include "support.hpp"

namespace oracle {

// Straight scalar evaluation of R p + t followed by the pinhole formula.
inline Eigen::Vector2d pixel(const posefuse::CameraModel& c, const Eigen::Vector3d& p) {
  const auto& R = c.rotation;
  const double x = R(0, 0) * p[0] + R(0, 1) * p[1] + R(0, 2) * p[2] + c.translation[0];
  const double y = R(1, 0) * p[0] + R(1, 1) * p[1] + R(1, 2) * p[2] + c.translation[1];
  const double z = R(2, 0) * p[0] + R(2, 1) * p[1] + R(2, 2) * p[2] + c.translation[2];
  return {c.fx * x / z + c.cx, c.fy * y / z + c.cy};
}

inline double joint_distance(const posefuse::Pose3DSequence& a, const posefuse::Pose3DSequence& b,
                             std::size_t t, std::size_t j, bool root_relative) {
  const std::size_t r = a.schema().root_index;
  double sq = 0.0;
  for (int c = 0; c < 3; ++c) {
    double d = a(t, j)[c] - b(t, j)[c];
    if (root_relative) d -= a(t, r)[c] - b(t, r)[c];
    sq += d * d;
  }
  return std::sqrt(sq);
}

// Frames, joints, coordinates.
inline double mpjpe(const posefuse::Pose3DSequence& gt, const posefuse::Pose3DSequence& pred,
                    bool root_relative = true) {
  double total = 0.0;
  for (std::size_t t = 0; t < gt.frames(); ++t) {
    double frame = 0.0;
    for (std::size_t j = 0; j < gt.joints(); ++j)
      frame += joint_distance(gt, pred, t, j, root_relative);
    total += frame / static_cast<double>(gt.joints());
  }
  return total / static_cast<double>(gt.frames());
}

// Differences first, then the joint-error average.
inline double velocity(const posefuse::Pose3DSequence& gt, const posefuse::Pose3DSequence& pred) {
  double total = 0.0;
  for (std::size_t t = 1; t < gt.frames(); ++t) {
    double frame = 0.0;
    for (std::size_t j = 0; j < gt.joints(); ++j) {
      double sq = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double dg = gt(t, j)[c] - gt(t - 1, j)[c];
        const double dp = pred(t, j)[c] - pred(t - 1, j)[c];
        sq += (dg - dp) * (dg - dp);
      }
      frame += std::sqrt(sq);
    }
    total += frame / static_cast<double>(gt.joints());
  }
  return total / static_cast<double>(gt.frames() - 1);
}

// Mean normalized 2D distance over frames and truth-confident joints.
inline double score(const posefuse::Pose2DSequence& det, const posefuse::Pose2DSequence& truth,
                    int image_width) {
  const double s = posefuse::kNormalizedWidth / image_width;
  double total = 0.0;
  for (std::size_t t = 0; t < truth.frames(); ++t) {
    double frame = 0.0;
    int n = 0;
    for (std::size_t j = 0; j < truth.joints(); ++j) {
      if (truth.confidence(t, j) <= 0.0) continue;
      const double dx = s * det(t, j).x() - s * truth(t, j).x();
      const double dy = s * det(t, j).y() - s * truth(t, j).y();
      frame += std::sqrt(dx * dx + dy * dy);
      ++n;
    }
    total += frame / n;
  }
  return total / static_cast<double>(truth.frames());
}

inline double mean_error_after(const std::vector<Eigen::Vector3d>& gt,
                               const std::vector<Eigen::Vector3d>& pred, double s,
                               const Eigen::Matrix3d& R, const Eigen::Vector3d& t) {
  double sum = 0.0;
  for (std::size_t j = 0; j < gt.size(); ++j) sum += (s * (R * pred[j]) + t - gt[j]).norm();
  return sum / static_cast<double>(gt.size());
}

// Best mean joint error over `samples` similarity transforms drawn broadly:
// uniform rotations, log-uniform scale in [0.5, 2], translations that map
// the pred centroid near the gt centroid.
inline double similarity_search(const std::vector<Eigen::Vector3d>& gt,
                                const std::vector<Eigen::Vector3d>& pred, posefuse::Rng& rng,
                                int samples) {
  Eigen::Vector3d mg = Eigen::Vector3d::Zero(), mp = Eigen::Vector3d::Zero();
  for (std::size_t j = 0; j < gt.size(); ++j) {
    mg += gt[j];
    mp += pred[j];
  }
  mg /= static_cast<double>(gt.size());
  mp /= static_cast<double>(gt.size());
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    const Eigen::Matrix3d R = q.normalized().toRotationMatrix();
    const double s = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
    const Eigen::Vector3d jitter(rng.normal(), rng.normal(), rng.normal());
    const Eigen::Vector3d t = mg - s * (R * mp) + 20.0 * jitter;
    best = std::min(best, mean_error_after(gt, pred, s, R, t));
  }
  return best;
}

}  // namespace oracle
