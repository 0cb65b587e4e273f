#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "posefuse/demo.hpp"
#include "posefuse/error.hpp"
#include "posefuse/lifter.hpp"
#include "posefuse/manifest.hpp"
#include "posefuse/metrics.hpp"
#include "posefuse/pipeline.hpp"
#include "posefuse/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace posefuse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitPartial = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;
};

PipelineConfig load_config(const Globals& g) {
  if (g.config.empty()) throw Error(ErrorCode::Validation, "--config is required");
  PipelineConfig c = load_pipeline_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.workers) c.workers = *g.workers;
  c.validate();
  return c;
}

fs::path out_dir(const Globals& g) {
  if (g.out.empty()) throw Error(ErrorCode::Validation, "--out is required");
  return g.out;
}

void print_stage(const char* name, const StageStats& s) {
  std::printf("%-9s processed %zu, skipped %zu, failed %zu\n", name, s.processed, s.skipped,
              s.failed);
}

int stage_exit(const Pipeline& p) {
  return p.manifest().count(SampleStatus::Failed) > 0 ? kExitPartial : kExitOk;
}

void print_filter(const FilterOutcome& f) {
  std::printf("kept %zu of %zu\n", f.kept_ids.size(), f.unfiltered.count);
  for (const auto& id : f.kept_ids) std::printf("  %s\n", id.c_str());
  std::cout << nlohmann::json{{"unfiltered", to_json(f.unfiltered)},
                              {"filtered", to_json(f.filtered)}}
                   .dump(2)
            << '\n';
}

std::vector<Pose3DSequence> read_all(const std::vector<std::string>& files,
                                     const SchemaRegistry& registry) {
  std::vector<Pose3DSequence> out;
  for (const auto& f : files) out.push_back(read_pose3d(f, registry));
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = list.find(',', pos);
    const std::string item = list.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (!item.empty()) seeds.push_back(std::stoull(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (seeds.empty()) throw Error(ErrorCode::Validation, "--seeds needs at least one value");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pose-sequence fusion, synthetic augmentation and evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Pipeline config (JSON)");
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--workers", g.workers, "Override the worker count")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Pipeline output directory");

  auto* fuse = app.add_subcommand("fuse", "Pair scenes with motions and write ground truth");
  auto* generate = app.add_subcommand("generate", "Render frames through the generator adapter");
  auto* detect = app.add_subcommand("detect", "Run the detector adapter on generated frames");
  auto* score = app.add_subcommand("score", "Score detections against the guidance");
  auto* filter = app.add_subcommand("filter", "Keep the best-scoring fraction");
  auto* run = app.add_subcommand("run", "All stages: fuse, generate, detect, score, filter");

  auto* exp = app.add_subcommand("export", "Write a lifter training set from kept samples");
  std::string channel = "GT", export_dir;
  exp->add_option("--channel", channel, "GT or HPE")->check(CLI::IsMember({"GT", "HPE", "gt", "hpe"}));
  exp->add_option("--dest", export_dir, "Export directory")->required();

  auto* eval = app.add_subcommand("eval", "Metric suite for predictions against ground truth");
  std::vector<std::string> gt_files, pred_files;
  std::string eval_json;
  bool absolute = false, rigid = false;
  eval->add_option("--gt", gt_files, "Ground-truth 3D pose files")->required();
  eval->add_option("--pred", pred_files, "Predicted 3D pose files, same order")->required();
  eval->add_option("--json", eval_json, "Write the JSON report here");
  eval->add_flag("--absolute", absolute, "Compare without subtracting the root joint");
  eval->add_flag("--rigid", rigid, "P-MPJPE without the scale factor");

  auto* regime = app.add_subcommand("regime", "GT/HPE train-test regime table");
  double lambda = 1.0;
  std::string seeds_arg = "1,2,3,4,5", noise_path, corpus_dir, test_dir, regime_json;
  std::size_t synthetic = 0, frames = 8;
  bool include_filtered = false, zero_noise = false;
  regime->add_option("--lambda", lambda, "Ridge regularization")->check(CLI::NonNegativeNumber);
  regime->add_option("--seeds", seeds_arg, "Comma-separated seeds");
  regime->add_option("--noise", noise_path, "Detector noise config; re-simulates HPE inputs");
  regime->add_flag("--zero-noise", zero_noise, "Re-simulate HPE inputs with no noise");
  regime->add_option("--corpus", corpus_dir, "Pipeline output directory (train, or both)");
  regime->add_option("--test-corpus", test_dir, "Pipeline output directory for testing");
  regime->add_flag("--include-filtered", include_filtered, "Use filtered-out samples too");
  regime->add_option("--synthetic", synthetic, "Generate N synthetic sequences instead");
  regime->add_option("--frames", frames, "Frames per synthetic sequence");
  regime->add_option("--json", regime_json, "Write the JSON table here");

  auto* validate = app.add_subcommand("validate", "Check manifest paths, hashes and consistency");

  auto* demo = app.add_subcommand("demo", "Write toy source datasets and a config");
  DemoOptions demo_opts;
  std::size_t a_scenes = 2, a_motions = 2, b_scenes = 2, b_motions = 2;
  std::string pairing = "all";
  demo->add_option("--a-scenes", a_scenes);
  demo->add_option("--a-motions", a_motions);
  demo->add_option("--b-scenes", b_scenes);
  demo->add_option("--b-motions", b_motions);
  demo->add_option("--frames", demo_opts.frames);
  demo->add_option("--width", demo_opts.image_width);
  demo->add_option("--height", demo_opts.image_height);
  demo->add_option("--pairing", pairing)->check(CLI::IsMember({"all", "cross", "in-domain"}));
  demo->add_option("--subsample", demo_opts.subsample);
  demo->add_option("--failure-prob", demo_opts.knob.failure_prob);
  demo->add_option("--filter-fraction", demo_opts.filter_fraction);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const SchemaRegistry registry;
    if (*fuse || *generate || *detect || *score || *filter) {
      Pipeline p(load_config(g), out_dir(g), registry);
      if (*fuse) print_stage("fuse", p.fuse());
      if (*generate) print_stage("generate", p.generate());
      if (*detect) print_stage("detect", p.detect());
      if (*score) print_stage("score", p.score());
      if (*filter) print_filter(p.filter());
      for (const auto& w : p.warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
      return stage_exit(p);
    }
    if (*run) {
      const auto report = run_pipeline(load_config(g), out_dir(g), registry);
      for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::printf("attempted %zu, kept %zu, filtered out %zu, failed %zu, rejected %zu, "
                  "skipped %zu\n",
                  report.attempted, report.kept, report.filtered_out, report.failed,
                  report.rejected, report.skipped);
      print_filter(report.filter);
      return report.failed > 0 ? kExitPartial : kExitOk;
    }
    if (*exp) {
      const fs::path dir = out_dir(g);
      export_training_set(read_manifest(dir / kManifestName), dir, channel_from_string(channel),
                          export_dir);
      std::printf("exported %s channel to %s\n", channel.c_str(), export_dir.c_str());
      return kExitOk;
    }
    if (*eval) {
      if (gt_files.size() != pred_files.size())
        throw Error(ErrorCode::Validation, "--gt and --pred need the same number of files");
      const auto gt = read_all(gt_files, registry);
      const auto pred = read_all(pred_files, registry);
      std::vector<std::string> ids;
      for (const auto& f : gt_files) ids.push_back(fs::path(f).stem().string());
      const auto report = evaluate(gt, pred, {!absolute, !rigid}, ids);
      std::cout << format_table(report);
      if (!eval_json.empty()) std::ofstream(eval_json) << to_json(report).dump(2) << '\n';
      return kExitOk;
    }
    if (*regime) {
      std::optional<DetectorNoiseConfig> noise;
      if (zero_noise) noise = DetectorNoiseConfig::zero();
      if (!noise_path.empty()) noise = noise_from_json(read_json_file(noise_path));
      RegimeCorpus train, test;
      if (synthetic > 0) {
        RegimeCorpus all = synthetic_regime_corpus(synthetic, frames, g.seed.value_or(0));
        if (!noise) noise = DetectorNoiseConfig{};
        for (std::size_t i = 0; i < all.size(); ++i) (i % 2 ? test : train).push_back(all[i]);
      } else {
        if (corpus_dir.empty())
          throw Error(ErrorCode::Validation, "regime needs --corpus or --synthetic");
        RegimeCorpus all = regime_corpus_from_manifest(
            read_manifest(fs::path(corpus_dir) / kManifestName), corpus_dir, registry,
            include_filtered);
        if (!test_dir.empty()) {
          train = std::move(all);
          test = regime_corpus_from_manifest(read_manifest(fs::path(test_dir) / kManifestName),
                                             test_dir, registry, include_filtered);
        } else {
          for (std::size_t i = 0; i < all.size(); ++i) (i % 2 ? test : train).push_back(all[i]);
        }
      }
      const auto table = run_regimes(train, test, lambda, parse_seeds(seeds_arg), noise);
      std::cout << format_table(table);
      if (!regime_json.empty()) std::ofstream(regime_json) << to_json(table).dump(2) << '\n';
      return kExitOk;
    }
    if (*validate) {
      const fs::path dir = out_dir(g);
      const auto issues = validate_manifest(read_manifest(dir / kManifestName), dir, registry);
      for (const auto& i : issues)
        std::printf("%s: %s\n", i.sample_id.empty() ? "<manifest>" : i.sample_id.c_str(),
                    i.message.c_str());
      if (!issues.empty()) return kExitValidation;
      std::printf("manifest OK\n");
      return kExitOk;
    }
    if (*demo) {
      demo_opts.datasets = {{"A", a_scenes, a_motions, std::nullopt}, {"B", b_scenes, b_motions, 1}};
      demo_opts.pairing = pairing_mode_from_string(pairing);
      if (g.seed) demo_opts.seed = *g.seed;
      const fs::path config = write_demo(out_dir(g), demo_opts);
      std::printf("%s\n", config.string().c_str());
      return kExitOk;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return kExitUsage;
}
