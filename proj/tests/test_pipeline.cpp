#include "doctest.h"

#include <fstream>

#include "posefuse/demo.hpp"
#include "posefuse/pipeline.hpp"
#include "posefuse/tensor_io.hpp"
#include "support.hpp"

using namespace posefuse;
using testing::error_code_of;
namespace fs = std::filesystem;

namespace {

// Two scenes from A, two motions from B.
DemoOptions two_by_two() {
  DemoOptions o;
  o.datasets = {{"A", 2, 0, std::nullopt}, {"B", 0, 2, 1}};
  o.pairing = PairingPolicy::Mode::CrossOnly;
  o.frames = 4;
  return o;
}

PipelineConfig demo_config(const fs::path& dir, const DemoOptions& o) {
  return load_pipeline_config(write_demo(dir, o));
}

nlohmann::json stable(const Manifest& m) { return to_json(m, false); }

bool mentions(const std::vector<ValidationIssue>& issues, const std::string& id,
              const std::string& text) {
  for (const auto& i : issues)
    if (i.sample_id == id && i.message.find(text) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("2x2 cross-only run attempts 4 and keeps 1") {
    testing::TempDir dir;
    const auto config = demo_config(dir / "src", two_by_two());
    const auto report = run_pipeline(config, dir / "out");
    CHECK(report.attempted == 4);
    CHECK(report.kept == 1);
    CHECK(report.filtered_out == 3);
    CHECK(report.failed == 0);
    for (const auto& s : report.manifest.samples) CHECK(s.cross_domain());
    CHECK(report.filter.kept_ids.size() == 1);
    CHECK(report.filter.filtered.mean <= report.filter.unfiltered.mean);
    CHECK(validate_manifest(report.manifest, dir / "out", SchemaRegistry{}).empty());
    CHECK(fs::exists(dir / "out" / kManifestName));
  }

  TEST_CASE("rerun skips finished work and changes nothing") {
    testing::TempDir dir;
    const auto config = demo_config(dir / "src", two_by_two());
    const auto first = run_pipeline(config, dir / "out");
    CHECK(first.skipped == 0);
    const auto second = run_pipeline(config, dir / "out");
    CHECK(second.skipped >= 4 * 3);
    CHECK(stable(second.manifest) == stable(first.manifest));
  }

  TEST_CASE("worker count does not change outputs") {
    testing::TempDir dir;
    auto config = demo_config(dir / "src", DemoOptions{});
    config.workers = 1;
    const auto one = run_pipeline(config, dir / "w1");
    config.workers = 3;
    const auto three = run_pipeline(config, dir / "w3");
    CHECK(stable(one.manifest) == stable(three.manifest));
    CHECK(one.manifest.config_digest == three.manifest.config_digest);
    for (const auto& s : one.manifest.samples)
      CHECK(read_file_bytes(dir / "w1" / s.file(kGuidanceFile).path) ==
            read_file_bytes(dir / "w3" / s.file(kGuidanceFile).path));
  }

  TEST_CASE("a different seed changes the corpus") {
    testing::TempDir dir;
    auto config = demo_config(dir / "src", two_by_two());
    const auto a = run_pipeline(config, dir / "a");
    config.seed += 1;
    const auto b = run_pipeline(config, dir / "b");
    CHECK(stable(a.manifest) != stable(b.manifest));
  }

  TEST_CASE("validation names tampered samples") {
    testing::TempDir dir;
    const auto config = demo_config(dir / "src", two_by_two());
    const auto report = run_pipeline(config, dir / "out");
    const auto& first = report.manifest.samples[0];
    const auto& second = report.manifest.samples[1];

    {
      std::ofstream f(dir / "out" / first.file(kDetectedFile).path, std::ios::app | std::ios::binary);
      f << 'x';
    }
    fs::remove(dir / "out" / second.frames[0].path);
    const auto issues = validate_manifest(report.manifest, dir / "out", SchemaRegistry{});
    CHECK(mentions(issues, first.id, "hash mismatch"));
    CHECK(mentions(issues, second.id, "missing"));

    auto duplicated = report.manifest;
    duplicated.samples.push_back(duplicated.samples[2]);
    CHECK(mentions(validate_manifest(duplicated, dir / "out", SchemaRegistry{}),
                   duplicated.samples[2].id, "duplicate"));
  }

  TEST_CASE("export copies the stored channel bytes") {
    testing::TempDir dir;
    auto opts = two_by_two();
    opts.filter_fraction = 1.0;
    const auto report = run_pipeline(demo_config(dir / "src", opts), dir / "out");
    REQUIRE(report.kept == 4);
    export_training_set(report.manifest, dir / "out", Channel::GT, dir / "gt");
    export_training_set(report.manifest, dir / "out", Channel::HPE, dir / "hpe");
    for (const auto& s : report.manifest.samples) {
      CHECK(read_file_bytes(dir / "gt" / (s.id + ".input.pseq")) ==
            read_file_bytes(dir / "out" / s.file(kGuidanceFile).path));
      CHECK(read_file_bytes(dir / "hpe" / (s.id + ".input.pseq")) ==
            read_file_bytes(dir / "out" / s.file(kDetectedFile).path));
      CHECK(read_file_bytes(dir / "gt" / (s.id + ".target.pseq")) ==
            read_file_bytes(dir / "out" / s.file(kGtCameraFile).path));
    }
    const auto set = load_training_set(dir / "hpe", SchemaRegistry{});
    CHECK(set.channel == Channel::HPE);
    CHECK(set.ids.size() == 4);
    const auto model = fit(set.inputs, set.targets, 1.0);
    CHECK(model.input_schema->name == "coco-body");
    CHECK(predict(model, set.inputs[0]).frames() == 4);
  }

  TEST_CASE("per-sample generator failures do not abort the run") {
    testing::TempDir dir;
    auto config = demo_config(dir / "src", two_by_two());
    const fs::path script = dir / "gen.sh";
    {
      // Fails for scene s1, otherwise copies the reference frame four times.
      std::ofstream f(script);
      f << "d=$(dirname \"$1\")\n"
           "case \"$d\" in *A.s1+*) exit 5;; esac\n"
           "for i in 0 1 2 3; do cp '"
        << (dir / "src" / "A" / "scenes" / "s0.png").string()
        << "' \"$d/frame_00000$i.png\"; done\n";
    }
    config.generator.type = "external";
    config.generator.command = "sh " + script.string();
    config.filter_fraction = 1.0;
    const auto report = run_pipeline(config, dir / "out");
    CHECK(report.attempted == 4);
    CHECK(report.failed == 2);
    CHECK(report.kept == 2);
    for (const auto& s : report.manifest.samples) {
      if (s.scene_ref.sample == "s1") {
        CHECK(s.status == SampleStatus::Failed);
        CHECK(s.reason.find("generate") != std::string::npos);
      } else {
        CHECK(s.status == SampleStatus::Kept);
      }
    }

    config.generator.command = "sh -c 'exit 1'";
    CHECK(error_code_of([&] { run_pipeline(config, dir / "all-fail"); }) == ErrorCode::EmptyCorpus);
  }

  TEST_CASE("manifest JSON round trip and status names") {
    testing::TempDir dir;
    const auto report = run_pipeline(demo_config(dir / "src", two_by_two()), dir / "out");
    const auto back = manifest_from_json(to_json(report.manifest));
    CHECK(stable(back) == stable(report.manifest));
    CHECK(read_manifest(dir / "out" / kManifestName).samples.size() == 4);
    for (auto s : {SampleStatus::Fused, SampleStatus::Generated, SampleStatus::Detected,
                   SampleStatus::Scored, SampleStatus::Kept, SampleStatus::FilteredOut,
                   SampleStatus::Failed, SampleStatus::Rejected})
      CHECK(sample_status_from_string(to_string(s)) == s);
    CHECK(to_string(SampleStatus::FilteredOut) == "filtered_out");
    CHECK(stage_rank(SampleStatus::Failed) < stage_rank(SampleStatus::Fused));
  }

  TEST_CASE("config validation and digest") {
    testing::TempDir dir;
    auto config = demo_config(dir / "src", two_by_two());
    const auto digest = config.digest();
    config.workers = 7;
    CHECK(config.digest() == digest);
    config.seed = 99;
    CHECK(config.digest() != digest);
    config.filter_fraction = 0.0;
    CHECK(error_code_of([&] { config.validate(); }) == ErrorCode::Validation);
    config.filter_fraction = 0.1;
    config.generator.type = "external";
    CHECK(error_code_of([&] { config.validate(); }) == ErrorCode::Validation);
  }
}
