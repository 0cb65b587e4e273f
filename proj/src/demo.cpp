#include "posefuse/demo.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Geometry>

#include "posefuse/error.hpp"
#include "posefuse/image.hpp"
#include "posefuse/rng.hpp"
#include "posefuse/tensor_io.hpp"

namespace posefuse {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// Unit vector hanging down, swung forward (towards +Y) by `pitch` and out to
// the side (towards `side` * X) by `roll`.
Eigen::Vector3d limb(double pitch, double roll, double side) {
  return {side * std::sin(roll), std::sin(pitch) * std::cos(roll),
          -std::cos(pitch) * std::cos(roll)};
}

Image background(std::uint64_t seed, int width, int height) {
  Rng rng(seed);
  const auto channel = [&](double lo, double hi) {
    return static_cast<std::uint8_t>(rng.uniform(lo, hi));
  };
  const Rgb top{channel(60, 140), channel(60, 140), channel(60, 140)};
  const Rgb bottom{channel(20, 90), channel(20, 90), channel(20, 90)};
  Image img(width, height, top);
  for (int y = 0; y < height; ++y) {
    const double a = static_cast<double>(y) / height;
    Rgb c;
    for (int k = 0; k < 3; ++k)
      c[k] = static_cast<std::uint8_t>((1.0 - a) * top[k] + a * bottom[k]);
    for (int x = 0; x < width; ++x) img.set(x, y, c);
  }
  for (int r = 0; r < 6; ++r) {
    const Eigen::Vector2d a(rng.uniform(0, width), rng.uniform(0, height));
    const Eigen::Vector2d b(rng.uniform(0, width), rng.uniform(0, height));
    draw_line(img, a, b, rng.uniform(4, 30),
              {channel(30, 160), channel(30, 160), channel(30, 160)});
  }
  return img;
}

nlohmann::json vec_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace

Pose3DSequence procedural_motion(std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  const double size = rng.uniform(0.88, 1.12);
  const double thigh = 450.0 * size, shin = 440.0 * size, ankle_h = 60.0 * size;
  const double hip_w = 120.0 * size, shoulder_w = 170.0 * size;
  const double upper_arm = 280.0 * size, forearm = 250.0 * size;
  const double period = rng.uniform(18.0, 34.0);  // frames per gait cycle
  const double phase0 = rng.uniform(0.0, 2.0 * kPi);
  const double stride = rng.uniform(0.15, 0.55);  // leg swing amplitude, rad
  const double knee = rng.uniform(0.2, 0.9);
  const double arm_swing = rng.uniform(0.1, 0.7);
  const double arm_abduct = rng.uniform(0.05, 0.6);
  const double elbow = rng.uniform(0.1, 1.2);
  const double lean = rng.uniform(-0.15, 0.25);
  const double crouch = rng.uniform(0.0, 0.35);
  const double speed = rng.uniform(0.0, 18.0);  // mm / frame
  const double heading = rng.uniform(-kPi, kPi);
  const double reach = rng.bernoulli(0.3) ? rng.uniform(0.5, 2.2) : 0.0;

  Pose3DSequence pose(h36m17(), frames, FrameTag::World);
  const Eigen::Matrix3d yaw =
      Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  for (std::size_t t = 0; t < frames; ++t) {
    const double phi = 2.0 * kPi * static_cast<double>(t) / period + phase0;
    const double swing_r = stride * std::sin(phi);
    const double swing_l = -swing_r;
    const double knee_r = crouch + knee * std::max(0.0, std::sin(phi + kPi / 2));
    const double knee_l = crouch + knee * std::max(0.0, std::sin(phi - kPi / 2));
    const double pelvis_z = (thigh + shin) * std::cos(crouch / 2) + ankle_h +
                            15.0 * size * std::cos(2.0 * phi);
    const Eigen::Vector3d pelvis(0.0, speed * static_cast<double>(t), pelvis_z);

    std::array<Eigen::Vector3d, 17> p;
    p[0] = pelvis;
    const Eigen::Vector3d hip_r = pelvis + Eigen::Vector3d(hip_w, 0, -20.0 * size);
    const Eigen::Vector3d hip_l = pelvis + Eigen::Vector3d(-hip_w, 0, -20.0 * size);
    p[1] = hip_r;
    p[2] = hip_r + thigh * limb(swing_r + crouch / 2, 0.0, 1.0);
    p[3] = p[2] + shin * limb(swing_r + crouch / 2 - knee_r, 0.0, 1.0);
    p[4] = hip_l;
    p[5] = hip_l + thigh * limb(swing_l + crouch / 2, 0.0, -1.0);
    p[6] = p[5] + shin * limb(swing_l + crouch / 2 - knee_l, 0.0, -1.0);
    const Eigen::Vector3d trunk(0.0, std::sin(lean), std::cos(lean));
    p[7] = pelvis + 230.0 * size * trunk;
    p[8] = p[7] + 250.0 * size * trunk;
    p[9] = p[8] + 110.0 * size * (trunk + Eigen::Vector3d(0, 0.1, 0)).normalized();
    p[10] = p[9] + 115.0 * size * (trunk + Eigen::Vector3d(0, 0.05, 0)).normalized();
    const Eigen::Vector3d sh_l = p[8] + Eigen::Vector3d(-shoulder_w, 0, -30.0 * size);
    const Eigen::Vector3d sh_r = p[8] + Eigen::Vector3d(shoulder_w, 0, -30.0 * size);
    const double raise = reach * (0.5 - 0.5 * std::cos(phi / 2));
    p[11] = sh_l;
    p[12] = sh_l + upper_arm * limb(-swing_l * arm_swing / stride * 0.8 + raise, arm_abduct, -1.0);
    p[13] = p[12] + forearm * limb(-swing_l * arm_swing / stride * 0.8 + raise + elbow,
                                   arm_abduct, -1.0);
    p[14] = sh_r;
    p[15] = sh_r + upper_arm * limb(-swing_r * arm_swing / stride * 0.8, arm_abduct, 1.0);
    p[16] = p[15] + forearm * limb(-swing_r * arm_swing / stride * 0.8 + elbow, arm_abduct, 1.0);
    for (std::size_t j = 0; j < 17; ++j) pose(t, j) = yaw * p[j];
  }
  return pose;
}

SceneSample random_scene(std::string dataset_id, std::string sample_id, std::uint64_t seed,
                         int width, int height) {
  Rng rng(seed);
  SceneSample s;
  s.dataset_id = std::move(dataset_id);
  s.sample_id = std::move(sample_id);
  s.ground_height = rng.uniform(-200.0, 200.0);
  s.root_position = {rng.uniform(-800.0, 800.0), rng.uniform(-800.0, 800.0), s.ground_height};
  const double facing = rng.uniform(-kPi, kPi);
  s.facing = {std::cos(facing), std::sin(facing), 0.0};
  const double view = facing + rng.uniform(-kPi / 3, kPi / 3);
  const double distance = rng.uniform(4000.0, 5500.0);
  const double eye_height = rng.uniform(900.0, 1900.0);
  const Eigen::Vector3d target = s.root_position + Eigen::Vector3d(0, 0, 900.0);
  const Eigen::Vector3d eye = s.root_position + Eigen::Vector3d(distance * std::cos(view),
                                                                distance * std::sin(view),
                                                                eye_height);
  const double focal = rng.uniform(1.1, 1.5) * std::min(width, height);
  s.camera = CameraModel::look_at(eye, target, kWorldUp, focal, width, height);
  return s;
}

fs::path write_demo(const fs::path& dir, const DemoOptions& o) {
  fs::create_directories(dir);
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& d : o.datasets) {
    const fs::path root = dir / d.id;
    fs::create_directories(root / "scenes");
    fs::create_directories(root / "motions");
    nlohmann::json scenes = nlohmann::json::array();
    for (std::size_t i = 0; i < d.scenes; ++i) {
      const std::string id = "s" + std::to_string(i);
      const std::uint64_t seed = derive_seed(o.seed, "scene/" + d.id + "/" + id);
      const SceneSample scene = random_scene(d.id, id, seed, o.image_width, o.image_height);
      const fs::path bg = root / "scenes" / (id + ".png");
      write_png(bg, background(seed, o.image_width, o.image_height));
      scenes.push_back({{"id", id},
                        {"camera", to_json(scene.camera)},
                        {"reference_frames", {"scenes/" + id + ".png"}},
                        {"root_position", vec_json(scene.root_position)},
                        {"facing", vec_json(scene.facing)},
                        {"ground_height", scene.ground_height}});
    }
    nlohmann::json motions = nlohmann::json::array();
    for (std::size_t i = 0; i < d.motions; ++i) {
      const std::string id = "m" + std::to_string(i);
      Pose3DSequence motion =
          procedural_motion(o.frames, derive_seed(o.seed, "motion/" + d.id + "/" + id));
      // Store in the dataset's own handedness; the loader's correction undoes it.
      motion = apply_handedness(std::move(motion), {d.flip_axis});
      write_pose(root / "motions" / (id + ".pseq"), motion);
      motions.push_back({{"id", id}, {"file", "motions/" + id + ".pseq"}});
    }
    std::ofstream(root / "source.json")
        << nlohmann::json{{"dataset_id", d.id},
                          {"schema", "h36m-17"},
                          {"handedness", to_json(HandednessCorrection{d.flip_axis})},
                          {"scenes", scenes},
                          {"motions", motions}}
               .dump(2)
        << '\n';
    sources.push_back(d.id + "/source.json");
  }
  nlohmann::json pairing{{"mode", to_string(o.pairing)}};
  pairing["subsample"] = o.subsample ? nlohmann::json(*o.subsample) : nlohmann::json();
  const fs::path config = dir / "config.json";
  std::ofstream(config) << nlohmann::json{{"sources", sources},
                                          {"pairing", pairing},
                                          {"guidance_mapping", "builtin:h36m-17->coco-body"},
                                          {"generator", {{"type", "mock"}, {"knob", to_json(o.knob)}}},
                                          {"detector",
                                           {{"type", "synthetic"},
                                            {"noise", to_json(DetectorNoiseConfig{})}}},
                                          {"filter_fraction", o.filter_fraction},
                                          {"max_outside_fraction", 0.2},
                                          {"seed", o.seed},
                                          {"workers", 1}}
                                  .dump(2)
                           << '\n';
  return config;
}

RegimeCorpus synthetic_regime_corpus(std::size_t sequences, std::size_t frames,
                                     std::uint64_t seed, int width, int height) {
  const FusionOptions options{h36m_to_coco(), 1.0};
  RegimeCorpus corpus;
  corpus.reserve(sequences);
  for (std::size_t i = 0, attempt = 0; corpus.size() < sequences; ++attempt) {
    if (attempt > 10 * sequences + 100)
      throw Error(ErrorCode::InvalidInput, "cannot place enough synthetic sequences");
    const std::string tag = std::to_string(attempt);
    SceneSample scene = random_scene("syn", "s" + tag, derive_seed(seed, "scene/" + tag),
                                     width, height);
    scene.reference_frame_paths = {"unrendered.png"};  // never rendered
    const MotionSample motion{"syn", "m" + tag,
                              procedural_motion(frames, derive_seed(seed, "motion/" + tag)), {}};
    FusedOutcome out = fuse_sample(scene, motion, fused_sample_id(scene, motion), options);
    if (!out.sample) continue;
    corpus.push_back(RegimeSequence{
        .id = out.sample->id,
        .gt2d = std::move(out.sample->guidance_2d),
        .hpe2d = std::nullopt,
        .target = std::move(out.sample->gt_3d_camera),
        .image_width = width,
    });
    ++i;
  }
  return corpus;
}

}  // namespace posefuse
