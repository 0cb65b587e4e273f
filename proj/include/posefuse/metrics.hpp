#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "posefuse/geometry.hpp"
#include "posefuse/skeleton.hpp"

namespace posefuse {

struct MetricOptions {
  // Subtract the root joint per frame from gt and pred before comparing.
  bool root_relative = true;
  // Similarity (with scale) or rigid Procrustes for P-MPJPE.
  bool procrustes_scale = true;
};

// s * R * x + t
struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return scale * (rotation * x) + translation;
  }
};

/// Least-squares similarity taking `source` onto `target` (Umeyama), rotation
/// kept proper by flipping the weakest singular direction. When the source is
/// degenerate (all points coincident) or `with_scale` is false, scale is 1;
/// `degenerate` reports the former.
Similarity procrustes(std::span<const Eigen::Vector3d> source,
                      std::span<const Eigen::Vector3d> target, bool with_scale = true,
                      bool* degenerate = nullptr);

double mpjpe(const Pose3DSequence& gt, const Pose3DSequence& pred, const MetricOptions& opts = {});

// Frame indices where the fallback path was taken are appended to `flagged`.
double p_mpjpe(const Pose3DSequence& gt, const Pose3DSequence& pred,
               const MetricOptions& opts = {}, std::vector<std::size_t>* flagged = nullptr);
double n_mpjpe(const Pose3DSequence& gt, const Pose3DSequence& pred,
               const MetricOptions& opts = {}, std::vector<std::size_t>* flagged = nullptr);

// mm/frame; requires at least two frames.
double velocity_error(const Pose3DSequence& gt, const Pose3DSequence& pred,
                      const MetricOptions& opts = {});

// Image-plane error in the normalized plane; same semantics as score_sample.
double pos2d_error(const Pose2DSequence& gt2d, const Pose2DSequence& pred2d,
                   const CameraModel& cam);

// Unweighted mean over sequences.
double per_sequence_average(std::span<const double> values);

struct SequenceMetrics {
  std::string id;
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
  double n_mpjpe = 0.0;
  std::optional<double> velocity_error;  // absent for single-frame sequences
};

struct MetricReport {
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
  double n_mpjpe = 0.0;
  std::optional<double> velocity_error;
  std::vector<SequenceMetrics> per_sequence;
};

MetricReport evaluate(std::span<const Pose3DSequence> gt, std::span<const Pose3DSequence> pred,
                      const MetricOptions& opts = {}, std::span<const std::string> ids = {});

nlohmann::json to_json(const MetricReport& report);
// Column layout: Sequence | MPJPE | P-MPJPE | N-MPJPE | Vel. Err.
std::string format_table(const MetricReport& report);

}  // namespace posefuse
