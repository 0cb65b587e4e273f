#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "posefuse/skeleton.hpp"
#include "posefuse/synth.hpp"

namespace posefuse {

// Affine ridge lifter. Input features per frame are the non-root 2D joints
// centred on the input-schema root and divided by the root-to-torso distance
// (zero for joints with zero confidence), followed by a constant 1. Outputs are
// root-relative 3D joints in the target schema.
struct LifterModel {
  Eigen::MatrixXd weights;  // (2(J_in - 1) + 1) x (3J_out)
  double lambda = 0.0;
  SchemaPtr input_schema;
  SchemaPtr output_schema;
  std::size_t center_index = 0;  // input normalization: centre joint
  std::size_t scale_index = 0;   // input normalization: torso joint
  double min_torso_scale = 1e-6;  // px; smaller frames are dropped
};

// nullopt when the torso scale is degenerate.
std::optional<Eigen::VectorXd> lifter_features(const Pose2DSequence& kps, std::size_t frame,
                                               std::size_t center_index, std::size_t scale_index,
                                               double min_torso_scale = 1e-6);

/// Solves (A^T A + lambda I) W = A^T B over all frames of all sequences.
/// Throws RankDeficient when the system is singular (suggest lambda > 0).
LifterModel fit(const std::vector<Pose2DSequence>& inputs,
                const std::vector<Pose3DSequence>& targets, double lambda,
                std::vector<std::string>* warnings = nullptr);

// Camera-frame, root-relative prediction; degenerate frames predict zeros.
Pose3DSequence predict(const LifterModel& model, const Pose2DSequence& kps,
                       std::vector<std::string>* warnings = nullptr);

// Mean squared error per output coordinate over usable training frames.
double training_mse(const LifterModel& model, const std::vector<Pose2DSequence>& inputs,
                    const std::vector<Pose3DSequence>& targets);

nlohmann::json to_json(const LifterModel& model);

enum class Input2D { GT, HPE };

struct Regime {
  Input2D train;
  Input2D test;
  std::string label() const;  // "(GT,HPE)"
  bool operator==(const Regime&) const = default;
};

// Table order: GT-GT, HPE-GT, GT-HPE, HPE-HPE.
std::vector<Regime> all_regimes();

struct RegimeSequence {
  std::string id;
  Pose2DSequence gt2d;                  // projected ground truth (x')
  std::optional<Pose2DSequence> hpe2d;  // detections (x^')
  Pose3DSequence target;                // camera-frame 3D ground truth
  int image_width = 1000;
};

using RegimeCorpus = std::vector<RegimeSequence>;

struct RegimeRow {
  Regime regime;
  std::vector<double> per_seed;  // mm
  double mean = 0.0;
};

struct RegimeTable {
  double lambda = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<RegimeRow> rows;

  const RegimeRow& row(Regime r) const;
  std::string ordering() const;  // "(GT,GT) < (HPE,GT) < ..."
};

/// For each seed and regime: fit on the train corpus's chosen channel,
/// predict on the test corpus's chosen channel, score root-relative MPJPE
/// (per-sequence average). With `noise`, HPE inputs are re-simulated from the
/// GT channel per seed; otherwise the stored detections are used.
RegimeTable run_regimes(const RegimeCorpus& train, const RegimeCorpus& test, double lambda,
                        const std::vector<std::uint64_t>& seeds,
                        const std::optional<DetectorNoiseConfig>& noise = std::nullopt);

nlohmann::json to_json(const RegimeTable& table);
std::string format_table(const RegimeTable& table);

}  // namespace posefuse
