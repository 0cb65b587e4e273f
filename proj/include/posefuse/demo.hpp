#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "posefuse/fusion.hpp"
#include "posefuse/lifter.hpp"
#include "posefuse/synth.hpp"

namespace posefuse {

// Procedural h36m-17 walk in mm: Z up, facing +Y, the body's right side
// towards +X, lowest foot near z = 0. Gait, body size, arm pose and the
// heading are drawn from `seed`.
Pose3DSequence procedural_motion(std::size_t frames, std::uint64_t seed);

// A scene whose camera looks at the placement point from the side the
// person faces (within +-60 degrees), 4-5.5 m away.
SceneSample random_scene(std::string dataset_id, std::string sample_id, std::uint64_t seed,
                         int width, int height);

struct DemoDataset {
  std::string id;
  std::size_t scenes = 2;
  std::size_t motions = 2;
  std::optional<int> flip_axis;  // motions are stored mirrored along this axis
};

struct DemoOptions {
  std::vector<DemoDataset> datasets{{"A", 2, 2, std::nullopt}, {"B", 2, 2, 1}};
  std::size_t frames = 8;
  int image_width = 640;
  int image_height = 480;
  std::uint64_t seed = 1;
  PairingPolicy::Mode pairing = PairingPolicy::Mode::AllPairs;
  std::optional<std::size_t> subsample;
  CorruptionKnob knob{60.0, 0.9, 0.5};
  double filter_fraction = 0.10;
};

/// Writes <dir>/<id>/source.json with backgrounds, cameras and motion files
/// for every dataset, plus <dir>/config.json; returns the config path.
std::filesystem::path write_demo(const std::filesystem::path& dir, const DemoOptions& options);

/// `sequences` fused samples (h36m-17 motion into its own random scene,
/// coco-body guidance) with no detections attached.
RegimeCorpus synthetic_regime_corpus(std::size_t sequences, std::size_t frames,
                                     std::uint64_t seed, int width = 1000, int height = 1000);

}  // namespace posefuse
