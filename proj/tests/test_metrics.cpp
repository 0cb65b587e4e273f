#include "doctest.h"

#include <cmath>

#include "posefuse/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace posefuse;
using testing::error_code_of;

namespace {

SchemaPtr chain_schema(std::size_t joints) {
  JointSchema s;
  s.name = "chain-" + std::to_string(joints);
  for (std::size_t j = 0; j < joints; ++j) s.joints.push_back("j" + std::to_string(j));
  for (std::size_t j = 1; j < joints; ++j) s.bones.emplace_back(j - 1, j);
  return make_schema(std::move(s));
}

Pose3DSequence transformed(const Pose3DSequence& p, double s, const Eigen::Matrix3d& R,
                           const Eigen::Vector3d& t) {
  Pose3DSequence out = p;
  for (std::size_t f = 0; f < p.frames(); ++f)
    for (std::size_t j = 0; j < p.joints(); ++j) out(f, j) = s * (R * p(f, j)) + t;
  return out;
}

Pose3DSequence noisy(posefuse::Rng& rng, const Pose3DSequence& p, double sigma) {
  Pose3DSequence out = p;
  for (std::size_t f = 0; f < p.frames(); ++f)
    for (std::size_t j = 0; j < p.joints(); ++j)
      out(f, j) += sigma * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  return out;
}

std::vector<Eigen::Vector3d> frame_vec(const Pose3DSequence& p, std::size_t t) {
  return {p.frame(t).begin(), p.frame(t).end()};
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("identical poses score zero everywhere") {
    posefuse::Rng rng(1);
    const auto gt = testing::random_pose(rng, 4, FrameTag::Camera);
    CHECK(mpjpe(gt, gt) == 0.0);
    CHECK(p_mpjpe(gt, gt) < 1e-9);
    CHECK(n_mpjpe(gt, gt) < 1e-9);
    CHECK(velocity_error(gt, gt) == 0.0);
  }

  TEST_CASE("one joint off by 12 mm in a 12-joint pose") {
    Pose3DSequence gt(chain_schema(12), 1, FrameTag::Camera);
    auto pred = gt;
    pred(0, 5) += Eigen::Vector3d(0, 0, 12);
    CHECK(mpjpe(gt, pred) == 1.0);
    CHECK(mpjpe(gt, pred, {false, true}) == 1.0);
  }

  TEST_CASE("MPJPE and velocity error match triple-loop oracles") {
    posefuse::Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      const auto frames = 2 + rng.below(8);
      const auto gt = testing::random_pose(rng, frames, FrameTag::Camera);
      const auto pred = testing::random_pose(rng, frames, FrameTag::Camera);
      CHECK(std::abs(mpjpe(gt, pred) - oracle::mpjpe(gt, pred, true)) < 1e-9);
      CHECK(std::abs(mpjpe(gt, pred, {false, true}) - oracle::mpjpe(gt, pred, false)) < 1e-9);
      CHECK(std::abs(velocity_error(gt, pred, {false, true}) - oracle::velocity(gt, pred)) < 1e-9);
    }
  }

  TEST_CASE("P-MPJPE removes planted similarity transforms") {
    posefuse::Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      const auto gt = testing::random_pose(rng, 3, FrameTag::Camera);
      const auto pred = transformed(gt, rng.uniform(0.2, 5.0), testing::random_rotation(rng),
                                    {rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3), 3000});
      CHECK(p_mpjpe(gt, pred) < 1e-6);
      CHECK(p_mpjpe(gt, pred, {false, true}) < 1e-6);
    }
  }

  TEST_CASE("procrustes recovers the planted transform") {
    posefuse::Rng rng(4);
    const auto pts = frame_vec(testing::random_pose(rng, 1), 0);
    const Eigen::Matrix3d R = testing::random_rotation(rng);
    std::vector<Eigen::Vector3d> target;
    for (const auto& p : pts) target.push_back(1.7 * (R * p) + Eigen::Vector3d(5, -6, 7));
    const auto sim = procrustes(pts, target);
    CHECK(sim.scale == doctest::Approx(1.7).epsilon(1e-12));
    CHECK((sim.rotation - R).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((sim.translation - Eigen::Vector3d(5, -6, 7)).cwiseAbs().maxCoeff() < 1e-8);

    // Reflected target: the result must still be a proper rotation.
    std::vector<Eigen::Vector3d> mirrored;
    for (const auto& p : pts) mirrored.emplace_back(-p.x(), p.y(), p.z());
    CHECK(procrustes(pts, mirrored).rotation.determinant() == doctest::Approx(1.0));
  }

  TEST_CASE("no random similarity beats the closed form") {
    posefuse::Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      const auto gt = testing::random_pose(rng, 1, FrameTag::Camera);
      const auto pred = noisy(rng, transformed(gt, 0.8, testing::random_rotation(rng), {10, 20, 30}),
                              40.0);
      const double closed = p_mpjpe(gt, pred, {false, true});
      CHECK(closed <= mpjpe(gt, pred, {false, true}));
      const double searched = oracle::similarity_search(frame_vec(gt, 0), frame_vec(pred, 0), rng, 2000);
      CHECK(searched >= closed - 1e-6);
    }
  }

  TEST_CASE("rigid P-MPJPE and degenerate frames") {
    posefuse::Rng rng(6);
    const auto gt = testing::random_pose(rng, 2, FrameTag::Camera);
    const auto pred = transformed(gt, 2.0, testing::random_rotation(rng), {0, 0, 0});
    CHECK(p_mpjpe(gt, pred, {true, true}) < 1e-6);
    CHECK(p_mpjpe(gt, pred, {true, false}) > 1.0);

    Pose3DSequence flat(h36m17(), 2, FrameTag::Camera);
    std::vector<std::size_t> flagged;
    CHECK(std::isfinite(p_mpjpe(gt, flat, {}, &flagged)));
    CHECK(flagged == std::vector<std::size_t>{0, 1});
    flagged.clear();
    CHECK(std::isfinite(n_mpjpe(gt, flat, {}, &flagged)));
    CHECK(flagged.size() == 2);
  }

  TEST_CASE("N-MPJPE removes scale and its factor is grid-optimal") {
    posefuse::Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const auto gt = testing::random_pose(rng, 2, FrameTag::Camera);
      CHECK(n_mpjpe(gt, transformed(gt, rng.uniform(0.1, 10), Eigen::Matrix3d::Identity(), {0, 0, 0})) <
            1e-9);
    }
    // Squared-error objective in s, evaluated on a grid around the closed form.
    const auto gt = testing::random_pose(rng, 1, FrameTag::Camera);
    const auto pred = noisy(rng, gt, 80.0);
    const std::size_t r = gt.schema().root_index;
    double pg = 0, pp = 0;
    for (std::size_t j = 0; j < 17; ++j) {
      const Eigen::Vector3d g = gt(0, j) - gt(0, r), p = pred(0, j) - pred(0, r);
      pg += p.dot(g);
      pp += p.squaredNorm();
    }
    const double s_star = pg / pp;
    const auto objective = [&](double s) {
      double e = 0;
      for (std::size_t j = 0; j < 17; ++j)
        e += ((gt(0, j) - gt(0, r)) - s * (pred(0, j) - pred(0, r))).squaredNorm();
      return e;
    };
    for (int k = -500; k <= 500; ++k) CHECK(objective(s_star + k * 1e-4) >= objective(s_star) - 1e-9);
  }

  TEST_CASE("N-MPJPE is invariant to scaling the prediction") {
    posefuse::Rng rng(8);
    const auto gt = testing::random_pose(rng, 3, FrameTag::Camera);
    const auto pred = noisy(rng, gt, 50.0);
    const double base = n_mpjpe(gt, pred);
    for (double s : {0.25, 0.5, 3.0, 17.0})
      CHECK(std::abs(n_mpjpe(gt, transformed(pred, s, Eigen::Matrix3d::Identity(), {0, 0, 0})) - base) <
            1e-9);
  }

  TEST_CASE("velocity error ignores a constant offset") {
    posefuse::Rng rng(9);
    // Dyadic coordinates so that adding the offset is itself exact.
    auto gt = testing::random_pose(rng, 6, FrameTag::Camera);
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t j = 0; j < 17; ++j) gt(t, j) = (gt(t, j) * 1024.0).array().round() / 1024.0;
    Pose3DSequence pred = gt;
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t j = 0; j < 17; ++j) pred(t, j) += Eigen::Vector3d(64, -128, 256);
    CHECK(velocity_error(gt, pred, {false, true}) == 0.0);
    CHECK(velocity_error(gt, pred) == 0.0);
    const auto one = testing::random_pose(rng, 1, FrameTag::Camera);
    CHECK(error_code_of([&] { velocity_error(one, one); }) == ErrorCode::InvalidInput);
  }

  TEST_CASE("per-sequence averaging is length independent") {
    CHECK(per_sequence_average(std::vector<double>{42.0}) == 42.0);
    CHECK(per_sequence_average(std::vector<double>{10.0, 20.0}) == 15.0);
    CHECK(error_code_of([] { per_sequence_average({}); }) == ErrorCode::InvalidInput);

    // Lengths 5 and 500 with constant errors 10 and 20.
    Pose3DSequence g5(h36m17(), 5, FrameTag::Camera), g500(h36m17(), 500, FrameTag::Camera);
    auto p5 = g5;
    auto p500 = g500;
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t j = 0; j < 17; ++j) p5(t, j).x() = 10;
    for (std::size_t t = 0; t < 500; ++t)
      for (std::size_t j = 0; j < 17; ++j) p500(t, j).x() = 20;
    const std::vector<Pose3DSequence> gt{g5, g500}, pred{p5, p500};
    const auto report = evaluate(gt, pred, {false, true});
    CHECK(report.mpjpe == 15.0);
    const double frame_weighted = (5 * 10.0 + 500 * 20.0) / 505.0;
    CHECK(report.mpjpe != doctest::Approx(frame_weighted));
  }

  TEST_CASE("metric axioms") {
    posefuse::Rng rng(10);
    for (int trial = 0; trial < 30; ++trial) {
      const auto a = testing::random_pose(rng, 2, FrameTag::Camera);
      const auto b = testing::random_pose(rng, 2, FrameTag::Camera);
      const auto c = testing::random_pose(rng, 2, FrameTag::Camera);
      CHECK(mpjpe(a, b) >= 0.0);
      CHECK(mpjpe(a, b) == doctest::Approx(mpjpe(b, a)).epsilon(1e-14));
      CHECK(mpjpe(a, c) <= mpjpe(a, b) + mpjpe(b, c) + 1e-9);
      CHECK(p_mpjpe(a, b) <= mpjpe(a, b) + 1e-9);
    }
  }

  TEST_CASE("evaluate report and table") {
    posefuse::Rng rng(11);
    const std::vector<Pose3DSequence> gt{testing::random_pose(rng, 3, FrameTag::Camera),
                                        testing::random_pose(rng, 1, FrameTag::Camera)};
    const std::vector<Pose3DSequence> pred{noisy(rng, gt[0], 5), noisy(rng, gt[1], 5)};
    const std::vector<std::string> ids{"walk", "pose"};
    const auto r = evaluate(gt, pred, {}, ids);
    REQUIRE(r.per_sequence.size() == 2);
    CHECK(r.per_sequence[0].velocity_error);
    CHECK_FALSE(r.per_sequence[1].velocity_error);
    CHECK(r.velocity_error == r.per_sequence[0].velocity_error);
    const auto table = format_table(r);
    CHECK(table.find("Vel. Err.") != std::string::npos);
    CHECK(table.find("walk") != std::string::npos);
    CHECK(to_json(r)["per_sequence"][1]["velocity_error"].is_null());
    CHECK(error_code_of([&] {
            mpjpe(gt[0], testing::random_pose(rng, 2, FrameTag::Camera));
          }) == ErrorCode::ShapeMismatch);
  }
}
