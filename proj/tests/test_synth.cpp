#include "doctest.h"

#include <algorithm>
#include <fstream>

#include "posefuse/manifest.hpp"
#include "posefuse/quality.hpp"
#include "posefuse/synth.hpp"
#include "posefuse/tensor_io.hpp"
#include "support.hpp"

using namespace posefuse;
using testing::error_code_of;
namespace fs = std::filesystem;

namespace {

// Smooth random walk of a full-body guidance sequence, well inside the frame.
Pose2DSequence guidance_walk(posefuse::Rng& rng, std::size_t frames, int width, int height) {
  Pose2DSequence g(coco_body(), frames);
  for (std::size_t j = 0; j < g.joints(); ++j) {
    Eigen::Vector2d p(rng.uniform(0.2, 0.8) * width, rng.uniform(0.2, 0.8) * height);
    for (std::size_t t = 0; t < frames; ++t) {
      p += Eigen::Vector2d(rng.uniform(-3, 3), rng.uniform(-3, 3));
      g(t, j) = p;
    }
  }
  for (const char* face : {"left_eye", "right_eye", "left_ear", "right_ear"})
    for (std::size_t t = 0; t < frames; ++t) g.confidence(t, coco_body()->index_of(face)) = 0.0;
  return g;
}

GeneratorRequest request(const testing::TempDir& dir, Pose2DSequence guidance,
                         std::uint64_t seed, int w = 320, int h = 240) {
  const fs::path ref = dir / "ref.png";
  if (!fs::exists(ref)) write_png(ref, Image(w, h, {40, 60, 80}));
  return GeneratorRequest{{ref}, std::move(guidance), dir / ("out" + std::to_string(seed)), seed,
                          w, h};
}

std::vector<double> joint_errors(const Pose2DSequence& a, const Pose2DSequence& b) {
  std::vector<double> e;
  for (std::size_t t = 0; t < a.frames(); ++t)
    for (std::size_t j = 0; j < a.joints(); ++j)
      if (b.confidence(t, j) > 0.0) e.push_back((a(t, j) - b(t, j)).norm());
  return e;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void write_script(const fs::path& path, const std::string& body) {
  std::ofstream(path) << "#!/bin/sh\n" << body << '\n';
  fs::permissions(path, fs::perms::owner_all);
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("mock generator writes T frames with deterministic bytes") {
    testing::TempDir dir;
    posefuse::Rng rng(1);
    const auto g = guidance_walk(rng, 5, 320, 240);
    const CorruptionKnob knob{40.0, 0.9, 0.5};
    auto a = request(dir, g, 7);
    mock_generate(a, knob);
    const auto frames = list_frames(a.output_dir);
    REQUIRE(frames.size() == 5);
    CHECK(frames[4].filename() == "frame_000004.png");
    std::vector<std::string> first;
    for (const auto& f : frames) first.push_back(sha256_file(f));
    const auto sidecar = read_file_bytes(a.output_dir / kSidecarName);
    mock_generate(a, knob);
    for (std::size_t t = 0; t < 5; ++t) CHECK(sha256_file(list_frames(a.output_dir)[t]) == first[t]);
    CHECK(read_file_bytes(a.output_dir / kSidecarName) == sidecar);
  }

  TEST_CASE("zero knob renders at the guidance positions") {
    testing::TempDir dir;
    posefuse::Rng rng(2);
    const auto g = guidance_walk(rng, 3, 320, 240);
    const auto req = request(dir, g, 3);
    mock_generate(req, CorruptionKnob{});
    const auto sidecar = read_pose2d(req.output_dir / kSidecarName, SchemaRegistry{});
    // The sidecar is float32 on disk.
    for (std::size_t i = 0; i < g.data().size(); ++i)
      CHECK((sidecar.data()[i] - g.data()[i]).cwiseAbs().maxCoeff() < 1e-3);
  }

  TEST_CASE("failure_prob 1 always drifts beyond the drift sigma") {
    posefuse::Rng rng(3);
    const CorruptionKnob knob{30.0, 0.8, 1.0};
    const MockGenerator gen(coco_body(), knob);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const GeneratorRequest req{{}, guidance_walk(rng, 12, 2000, 1500), {}, seed, 2000, 1500};
      // Mean of |d| for a 2D Gaussian of per-axis sigma s is s*sqrt(pi/2).
      CHECK(mean(joint_errors(gen.realize(req), req.guidance)) > knob.pose_drift_sigma);
    }
    const MockGenerator never(coco_body(), CorruptionKnob{30.0, 0.8, 0.0});
    const GeneratorRequest req{{}, guidance_walk(rng, 4, 640, 480), {}, 0, 640, 480};
    CHECK(never.realize(req).data() == req.guidance.data());
  }

  TEST_CASE("marker detector reads back the sidecar within a pixel") {
    testing::TempDir dir;
    posefuse::Rng rng(4);
    for (std::uint64_t seed : {11u, 12u}) {
      const auto req = request(dir, guidance_walk(rng, 4, 640, 480), seed, 640, 480);
      mock_generate(req, CorruptionKnob{25.0, 0.9, 1.0});
      const auto truth = read_pose2d(req.output_dir / kSidecarName, SchemaRegistry{});
      const auto found = detect(req.output_dir, MarkerDetector(coco_body(), DetectorNoiseConfig::zero()));
      std::size_t visible = 0;
      for (std::size_t t = 0; t < truth.frames(); ++t)
        for (std::size_t j = 0; j < truth.joints(); ++j) {
          CHECK(found.confidence(t, j) >= 0.0);
          CHECK(found.confidence(t, j) <= 1.0);
          if (truth.confidence(t, j) == 0.0 || found.confidence(t, j) == 0.0) continue;
          ++visible;
          CHECK((found(t, j) - truth(t, j)).norm() <= 1.0);
        }
      // Occlusion by later markers is possible but rare.
      CHECK(visible >= 4 * 13 - 4);
    }
  }

  TEST_CASE("detect on an empty directory is a missing-input error") {
    testing::TempDir dir;
    const MarkerDetector det(coco_body(), DetectorNoiseConfig{});
    CHECK(error_code_of([&] { detect(dir.path(), det); }) == ErrorCode::MissingInput);
    CHECK(error_code_of([&] { detect(dir / "nope", det); }) == ErrorCode::MissingInput);
  }

  TEST_CASE("generate validates its request") {
    testing::TempDir dir;
    posefuse::Rng rng(5);
    auto req = request(dir, guidance_walk(rng, 2, 320, 240), 1);
    req.reference_frame_paths = {dir / "missing.png"};
    CHECK(error_code_of([&] { mock_generate(req, {}); }) == ErrorCode::MissingInput);
    auto h = request(dir, Pose2DSequence(h36m17(), 2), 2);
    CHECK(error_code_of([&] { generate(h, MockGenerator(coco_body(), {})); }) ==
          ErrorCode::SchemaMismatch);
  }

  TEST_CASE("synth_detect with zero noise is the identity") {
    posefuse::Rng rng(6);
    auto truth = guidance_walk(rng, 10, 1920, 1080);
    truth.confidence(3, 2) = 0.7;
    const auto out = synth_detect(truth, DetectorNoiseConfig::zero(), 1920);
    CHECK(out.data() == truth.data());
    CHECK(out.confidences() == truth.confidences());
  }

  TEST_CASE("synth_detect is deterministic in its seed") {
    posefuse::Rng rng(7);
    const auto truth = guidance_walk(rng, 10, 1000, 1000);
    DetectorNoiseConfig cfg;
    cfg.seed = 99;
    CHECK(synth_detect(truth, cfg, 1000).data() == synth_detect(truth, cfg, 1000).data());
    cfg.seed = 100;
    CHECK(synth_detect(truth, cfg, 1000).data() != synth_detect(truth, DetectorNoiseConfig{}, 1000).data());
  }

  TEST_CASE("default noise lands in the real-detector error range") {
    posefuse::Rng rng(8);
    Pose2DSequence truth(coco_body(), 80);
    for (std::size_t t = 0; t < 80; ++t)
      for (std::size_t j = 0; j < 17; ++j) truth(t, j) = {rng.uniform(0, 2000), rng.uniform(0, 1500)};
    REQUIRE(truth.frames() * truth.joints() >= 1000);
    const auto errors = joint_errors(synth_detect(truth, DetectorNoiseConfig{}, 2000), truth);
    const double m = mean(errors);
    CHECK(m >= 15.0);
    CHECK(m <= 35.0);
  }

  TEST_CASE("error is invariant under the width normalization") {
    posefuse::Rng rng(9);
    Pose2DSequence truth(coco_body(), 60);
    for (std::size_t t = 0; t < 60; ++t)
      for (std::size_t j = 0; j < 17; ++j) truth(t, j) = {rng.uniform(0, 500), rng.uniform(0, 400)};
    CameraModel small;
    small.image_width = 500;
    small.cx = 250;
    const DetectorNoiseConfig cfg{};
    const auto det = synth_detect(truth, cfg, 500);
    // Same seed, 4x the width: every offset scales by exactly 4.
    Pose2DSequence big_truth = truth;
    for (std::size_t t = 0; t < 60; ++t)
      for (std::size_t j = 0; j < 17; ++j) big_truth(t, j) *= 4.0;
    CameraModel big = small;
    big.image_width = 2000;
    big.cx = 1000;
    const auto big_det = synth_detect(big_truth, cfg, 2000);
    CHECK(score_sample(det, truth, small).score ==
          doctest::Approx(score_sample(big_det, big_truth, big).score).epsilon(1e-9));
  }

  TEST_CASE("outliers make the error distribution heavy-tailed") {
    posefuse::Rng rng(10);
    Pose2DSequence truth(coco_body(), 400);
    for (std::size_t t = 0; t < 400; ++t)
      for (std::size_t j = 0; j < 17; ++j) truth(t, j) = {rng.uniform(0, 2000), rng.uniform(0, 2000)};
    const DetectorNoiseConfig cfg{};
    REQUIRE(cfg.outlier_prob == 0.05);
    const auto s = summarize(joint_errors(synth_detect(truth, cfg, 2000), truth));
    CHECK(s.p99 - s.p90 >= cfg.outlier_radius_min);
  }

  TEST_CASE("misses lower confidence and freeze the position") {
    posefuse::Rng rng(11);
    const auto truth = guidance_walk(rng, 50, 1000, 1000);
    DetectorNoiseConfig cfg;
    cfg.miss_prob = 1.0;
    const auto out = synth_detect(truth, cfg, 1000);
    for (std::size_t j = 0; j < 17; ++j) {
      if (truth.confidence(1, j) == 0.0) continue;
      CHECK(out.confidence(1, j) == 0.1);
      CHECK(out(1, j) == out(0, j));
    }
  }

  TEST_CASE("noise configs validate and round trip") {
    DetectorNoiseConfig bad;
    bad.outlier_prob = 1.5;
    CHECK(error_code_of([&] { bad.validate(); }) == ErrorCode::InvalidInput);
    bad = {};
    bad.outlier_radius_min = 200;
    CHECK(error_code_of([&] { bad.validate(); }) == ErrorCode::InvalidInput);
    const auto back = noise_from_json(to_json(DetectorNoiseConfig{}));
    CHECK(back.gaussian_sigma == DetectorNoiseConfig{}.gaussian_sigma);
    CHECK(back.outlier_radius_max == DetectorNoiseConfig{}.outlier_radius_max);
    CorruptionKnob k{1.0, 1.0, 0.0};
    CHECK(error_code_of([&] { k.validate(); }) == ErrorCode::InvalidInput);
  }

  TEST_CASE("external generator adapter") {
    testing::TempDir dir;
    posefuse::Rng rng(12);
    auto req = request(dir, guidance_walk(rng, 3, 320, 240), 5);
    const std::string ref = (dir / "ref.png").string();
    const std::string out = req.output_dir.string();

    write_script(dir / "good.sh", "for i in 0 1 2; do cp '" + ref + "' '" + out +
                                      "/frame_00000'$i.png; done");
    CHECK_NOTHROW(generate(req, ExternalGenerator("sh " + (dir / "good.sh").string(), coco_body())));
    CHECK(list_frames(req.output_dir).size() == 3);
    CHECK(fs::exists(req.output_dir / "request.json"));

    write_script(dir / "fail.sh", "exit 4");
    CHECK(error_code_of([&] {
            generate(req, ExternalGenerator("sh " + (dir / "fail.sh").string(), coco_body()));
          }) == ErrorCode::AdapterFailure);

    write_script(dir / "short.sh", "cp '" + ref + "' '" + out + "/frame_000000.png'");
    CHECK(error_code_of([&] {
            generate(req, ExternalGenerator("sh " + (dir / "short.sh").string(), coco_body()));
          }) == ErrorCode::FrameCountMismatch);

    write_script(dir / "junk.sh",
                 "for i in 0 1 2; do echo junk > '" + out + "/frame_00000'$i.png; done");
    CHECK(error_code_of([&] {
            generate(req, ExternalGenerator("sh " + (dir / "junk.sh").string(), coco_body()));
          }) == ErrorCode::UnreadableOutput);
  }

  TEST_CASE("external detector adapter") {
    testing::TempDir dir;
    posefuse::Rng rng(13);
    const auto req = request(dir, guidance_walk(rng, 3, 320, 240), 6);
    mock_generate(req, {});
    const auto frames_dir = req.output_dir;
    const auto reply = guidance_walk(rng, 3, 320, 240);
    write_pose(dir / "reply.pseq", reply);
    write_pose(dir / "short.pseq", guidance_walk(rng, 2, 320, 240));
    write_pose(dir / "h36m.pseq", Pose2DSequence(h36m17(), 3));

    const auto script = [&](const std::string& name, const std::string& src) {
      write_script(dir / name, "cp '" + (dir / src).string() + "' '" +
                                   (frames_dir / "detected.pseq").string() + "'");
      return ExternalDetector("sh " + (dir / name).string(), coco_body(), 0);
    };
    const auto got = detect(frames_dir, script("ok.sh", "reply.pseq"));
    CHECK(got.frames() == 3);
    CHECK((got(2, 5) - reply(2, 5)).norm() < 1e-3);
    CHECK(error_code_of([&] { detect(frames_dir, script("s.sh", "short.pseq")); }) ==
          ErrorCode::ShapeMismatch);
    CHECK(error_code_of([&] { detect(frames_dir, script("h.sh", "h36m.pseq")); }) ==
          ErrorCode::SchemaMismatch);
    write_script(dir / "none.sh", "true");
    CHECK(error_code_of([&] {
            detect(frames_dir, ExternalDetector("sh " + (dir / "none.sh").string(), coco_body(), 0));
          }) == ErrorCode::UnreadableOutput);
    write_script(dir / "bad.sh", "exit 1");
    CHECK(error_code_of([&] {
            detect(frames_dir, ExternalDetector("sh " + (dir / "bad.sh").string(), coco_body(), 0));
          }) == ErrorCode::AdapterFailure);
  }
}
