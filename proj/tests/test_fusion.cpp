#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "posefuse/demo.hpp"
#include "posefuse/fusion.hpp"
#include "support.hpp"

using namespace posefuse;
using testing::error_code_of;

namespace {

MotionSample motion_of(std::string dataset, std::string id, Pose3DSequence pose) {
  return MotionSample{std::move(dataset), std::move(id), std::move(pose), {}};
}

// Scene that reproduces the motion's own frame-0 placement.
SceneSample matching_scene(const Pose3DSequence& motion) {
  SceneSample s;
  s.dataset_id = "X";
  s.sample_id = "s";
  s.reference_frame_paths = {"bg.png"};
  s.root_position = motion(0, motion.schema().root_index);
  s.facing = *facing_direction(motion, 0);
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < motion.frames(); ++t)
    for (auto f : motion.schema().foot_indices) lowest = std::min(lowest, motion(t, f).z());
  s.ground_height = lowest;
  s.camera.translation = {0, 0, 1e5};
  return s;
}

double min_foot_height(const Pose3DSequence& p) {
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < p.frames(); ++t)
    for (auto f : p.schema().foot_indices) lowest = std::min(lowest, p(t, f).z());
  return lowest;
}

std::vector<SceneSample> scenes_for(const std::string& dataset, std::size_t n) {
  std::vector<SceneSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(random_scene(dataset, "s" + std::to_string(i), 100 + i, 640, 480));
    out.back().reference_frame_paths = {"bg.png"};
  }
  return out;
}

std::vector<MotionSample> motions_for(const std::string& dataset, std::size_t n,
                                      const std::string& prefix = "m") {
  std::vector<MotionSample> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(motion_of(dataset, prefix + std::to_string(i), procedural_motion(6, 200 + i)));
  return out;
}

}  // namespace

TEST_SUITE("fusion") {
  TEST_CASE("identity placement collapses to the input exactly") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto motion = procedural_motion(10, seed);
      const SceneSample scene = matching_scene(motion);
      const auto xf = compute_alignment(motion, scene);
      CHECK_FALSE(xf.warning);
      CHECK(xf.transform.rotation_w == Eigen::Matrix3d::Identity());
      CHECK(xf.transform.translation == Eigen::Vector3d::Zero());
      CHECK(align(motion, scene, xf.transform).data() == motion.data());
    }
  }

  TEST_CASE("pure translation") {
    const auto motion = procedural_motion(5, 3);
    SceneSample scene = matching_scene(motion);
    const Eigen::Vector3d shift(1234.5, -200.25, 0.0);
    scene.root_position += shift;
    const auto xf = compute_alignment(motion, scene);
    const auto out = align(motion, scene, xf.transform);
    for (std::size_t t = 0; t < motion.frames(); ++t)
      for (std::size_t j = 0; j < motion.joints(); ++j)
        CHECK((out(t, j) - (motion(t, j) + shift)).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("90 degree yaw matches an axis-angle oracle") {
    // procedural motion heading is random; rebuild one facing +Y by hand.
    Pose3DSequence motion(h36m17(), 3, FrameTag::World);
    posefuse::Rng rng(4);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t j = 0; j < 17; ++j)
        motion(t, j) = {rng.uniform(-300, 300), rng.uniform(-300, 300), rng.uniform(100, 1700)};
    motion(0, 1) = {150, 10, 900};   // right hip
    motion(0, 4) = {-150, 10, 900};  // left hip
    REQUIRE((*facing_direction(motion) - Eigen::Vector3d::UnitY()).norm() < 1e-12);

    SceneSample scene;
    scene.reference_frame_paths = {"bg.png"};
    scene.root_position = {500, 700, -40};
    scene.facing = {-1, 0, 0};
    scene.ground_height = -40;
    scene.camera.translation = {0, 0, 1e5};
    const auto xf = compute_alignment(motion, scene).transform;
    const auto out = align(motion, scene, xf);

    const Eigen::Matrix3d R =
        Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d root_b = motion(0, 0);
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t f : {3, 6})
        lowest = std::min(lowest, (R * (motion(t, f) - root_b) + scene.root_position).z());
    const Eigen::Vector3d residual(0, 0, scene.ground_height - lowest);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t j = 0; j < 17; ++j)
        CHECK((out(t, j) - (R * (motion(t, j) - root_b) + scene.root_position + residual))
                  .cwiseAbs()
                  .maxCoeff() < 1e-9);
  }

  TEST_CASE("degenerate hips fall back to identity with a warning") {
    auto motion = procedural_motion(4, 5);
    motion(0, 1) = motion(0, 4) + Eigen::Vector3d(0, 0, 50);
    SceneSample scene = matching_scene(procedural_motion(4, 5));
    const auto xf = compute_alignment(motion, scene);
    REQUIRE(xf.warning);
    CHECK(xf.warning->find("degenerate") != std::string::npos);
    CHECK(xf.transform.rotation_w == Eigen::Matrix3d::Identity());
  }

  TEST_CASE("alignment is rigid and puts the lowest foot on the ground") {
    posefuse::Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
      const auto motion = procedural_motion(12, rng.next());
      SceneSample scene;
      scene.reference_frame_paths = {"bg.png"};
      const double a = rng.uniform(-3.1, 3.1);
      scene.facing = {std::cos(a), std::sin(a), 0};
      scene.root_position = {rng.uniform(-3000, 3000), rng.uniform(-3000, 3000), 0};
      scene.ground_height = rng.uniform(-500, 500);
      scene.camera.translation = {0, 0, 1e5};
      const auto xf = compute_alignment(motion, scene).transform;
      const auto out = align(motion, scene, xf);
      for (std::size_t t = 0; t < motion.frames(); t += 3)
        for (std::size_t i = 0; i < 17; ++i)
          for (std::size_t j = i + 1; j < 17; ++j)
            CHECK(std::abs((out(t, i) - out(t, j)).norm() - (motion(t, i) - motion(t, j)).norm()) <
                  1e-9);
      CHECK(std::abs(min_foot_height(out) - scene.ground_height) < 1e-6);
      // Heading lands on the scene facing.
      CHECK((*facing_direction(out) - scene.facing).norm() < 1e-9);
    }
  }

  TEST_CASE("make_guidance matches a per-frame oracle") {
    const auto motion = procedural_motion(5, 7);
    const SceneSample scene = random_scene("A", "s0", 8, 1280, 720);
    const auto xf = compute_alignment(motion, scene).transform;
    const auto world = align(motion, scene, xf);
    const auto guide = make_guidance(world, scene.camera, h36m_to_coco());
    const auto& cam = scene.camera;
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t k = 0; k < coco_body()->size(); ++k) {
        const auto& name = coco_body()->joints[k];
        const auto src = h36m17()->find(name == "nose" ? "head" : name);
        if (!src) {
          CHECK(guide.confidence(t, k) == 0.0);
          continue;
        }
        const Eigen::Vector3d pc = cam.rotation * world(t, *src) + cam.translation;
        const Eigen::Vector2d uv(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
        CHECK((guide(t, k) - uv).cwiseAbs().maxCoeff() < 1e-9);
      }
  }

  TEST_CASE("placements off screen or behind the camera are rejected") {
    const auto motion = motion_of("B", "m0", procedural_motion(5, 9));
    SceneSample scene = random_scene("A", "s0", 10, 640, 480);
    scene.reference_frame_paths = {"bg.png"};
    const FusionOptions opts{h36m_to_coco(), 0.2};
    CHECK(fuse_sample(scene, motion, "ok", opts).sample);

    SceneSample far = scene;
    far.root_position += Eigen::Vector3d(20000, 20000, 0);
    const auto off = fuse_sample(far, motion, "off", opts);
    CHECK_FALSE(off.sample);
    CHECK(off.rejection.find("placement") != std::string::npos);

    SceneSample behind = scene;
    behind.camera.translation.z() = -1e5;
    CHECK_FALSE(fuse_sample(behind, motion, "behind", opts).sample);

    SceneSample no_frames = scene;
    no_frames.reference_frame_paths.clear();
    CHECK_FALSE(fuse_sample(no_frames, motion, "bare", opts).sample);
  }

  TEST_CASE("fused sample carries consistent channels") {
    const auto motion = motion_of("B", "m0", apply_handedness(procedural_motion(6, 11), {{1}}));
    MotionSample flipped = motion;
    flipped.handedness.flip_axis = 1;
    SceneSample scene = random_scene("A", "s0", 12, 640, 480);
    scene.reference_frame_paths = {"bg.png"};
    const auto out = fuse_sample(scene, flipped, "A.s0+B.m0", {h36m_to_coco(), 0.2});
    REQUIRE(out.sample);
    const auto& s = *out.sample;
    CHECK(s.cross_domain());
    CHECK(s.gt_3d_world.frame_tag() == FrameTag::World);
    CHECK(s.gt_3d_camera.frame_tag() == FrameTag::Camera);
    CHECK(s.gt_3d_camera.data() == world_to_camera(s.gt_3d_world, scene.camera).data());
    CHECK(s.guidance_2d.data() == make_guidance(s.gt_3d_world, scene.camera, h36m_to_coco()).data());
    // Corrected handedness: the aligned skeleton keeps the scene facing.
    CHECK((*facing_direction(s.gt_3d_world) - scene.facing).norm() < 1e-9);
  }

  TEST_CASE("pairing policies") {
    auto scenes = scenes_for("A", 2);
    auto b_scenes = scenes_for("B", 2);
    scenes.insert(scenes.end(), b_scenes.begin(), b_scenes.end());
    auto motions = motions_for("A", 2);
    auto b_motions = motions_for("B", 2);
    motions.insert(motions.end(), b_motions.begin(), b_motions.end());

    CHECK(plan_pairs(scenes, motions, {PairingPolicy::Mode::AllPairs, {}, 0}).size() == 16);
    const auto cross = plan_pairs(scenes, motions, {PairingPolicy::Mode::CrossOnly, {}, 0});
    CHECK(cross.size() == 8);
    for (const auto& p : cross)
      CHECK(scenes[p.scene_index].dataset_id != motions[p.motion_index].dataset_id);
    CHECK(plan_pairs(scenes, motions, {PairingPolicy::Mode::InDomainOnly, {}, 0}).size() == 8);

    // Self-pairs are skipped: three samples sharing ids within one dataset.
    const auto same_scenes = scenes_for("C", 3);
    const auto same_motions = motions_for("C", 3, "s");
    CHECK(plan_pairs(same_scenes, same_motions, {PairingPolicy::Mode::InDomainOnly, {}, 0}).size() ==
          6);
    CHECK(plan_pairs(scenes_for("A", 2), motions_for("B", 2), {PairingPolicy::Mode::CrossOnly, {}, 0})
              .size() == 4);
  }

  TEST_CASE("seeded subsampling is reproducible and scene-major") {
    const auto scenes = scenes_for("A", 5);
    const auto motions = motions_for("B", 5);
    const PairingPolicy p{PairingPolicy::Mode::AllPairs, 7, 42};
    const auto a = plan_pairs(scenes, motions, p);
    const auto b = plan_pairs(scenes, motions, p);
    REQUIRE(a.size() == 7);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
    for (std::size_t i = 1; i < a.size(); ++i)
      CHECK(std::pair(a[i - 1].scene_index, a[i - 1].motion_index) <
            std::pair(a[i].scene_index, a[i].motion_index));
    const auto c = plan_pairs(scenes, motions, {PairingPolicy::Mode::AllPairs, 7, 43});
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].id != c[i].id;
    CHECK(differs);
  }

  TEST_CASE("empty corpora") {
    CHECK(error_code_of([] { plan_pairs({}, motions_for("B", 1), {}); }) == ErrorCode::EmptyCorpus);
    CHECK(error_code_of([] {
            plan_pairs(scenes_for("A", 2), motions_for("A", 2),
                       {PairingPolicy::Mode::CrossOnly, {}, 0});
          }) == ErrorCode::EmptyCorpus);
  }

  TEST_CASE("cross_fuse reports rejections without aborting") {
    auto scenes = scenes_for("A", 2);
    scenes[1].root_position += Eigen::Vector3d(50000, 0, 0);
    const auto res = cross_fuse(scenes, motions_for("B", 2), {PairingPolicy::Mode::CrossOnly, {}, 0},
                                {h36m_to_coco(), 0.2});
    CHECK(res.samples.size() + res.rejected.size() == 4);
    CHECK(res.rejected.size() >= 2);
    for (const auto& [id, reason] : res.rejected) CHECK(id.rfind("A.s1+", 0) == 0);
  }
}
