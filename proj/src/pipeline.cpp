#include "posefuse/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "posefuse/error.hpp"
#include "posefuse/rng.hpp"
#include "posefuse/tensor_io.hpp"

namespace posefuse {

namespace fs = std::filesystem;

namespace {

Eigen::Vector3d vec3(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw Error(ErrorCode::Validation, "expected a 3-vector");
  return {v[0], v[1], v[2]};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : fs::absolute(base / path)).lexically_normal();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

std::string failure_reason(const char* stage, const Error& e) {
  return std::string(stage) + ": " + std::string(to_string(e.code())) + ": " + e.what();
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. fn must not throw.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

std::unique_ptr<GeneratorAdapter> make_generator(const GeneratorConfig& cfg, SchemaPtr schema) {
  if (cfg.type == "mock") return std::make_unique<MockGenerator>(std::move(schema), cfg.knob);
  return std::make_unique<ExternalGenerator>(cfg.command, std::move(schema));
}

std::unique_ptr<DetectorAdapter> make_detector(const DetectorConfig& cfg, SchemaPtr schema,
                                               std::uint64_t seed) {
  if (cfg.type == "synthetic") {
    DetectorNoiseConfig noise = cfg.noise;
    noise.seed = seed;
    return std::make_unique<MarkerDetector>(std::move(schema), noise);
  }
  return std::make_unique<ExternalDetector>(cfg.command, std::move(schema), seed);
}

void reset_after(ManifestSample& s, SampleStatus status) {
  const int rank = stage_rank(status);
  if (rank < stage_rank(SampleStatus::Generated)) {
    s.frames.clear();
    s.files.erase(kGeneratorTruthFile);
  }
  if (rank < stage_rank(SampleStatus::Detected)) s.files.erase(kDetectedFile);
  if (rank < stage_rank(SampleStatus::Scored)) {
    s.files.erase("quality");
    s.score.reset();
  }
  s.status = status;
  s.reason.clear();
}

bool verify_all(const fs::path& root, const ManifestSample& s,
                std::initializer_list<const char*> roles) {
  for (const char* role : roles) {
    auto it = s.files.find(role);
    if (it == s.files.end() || !verify_file_entry(root, it->second)) return false;
  }
  return true;
}

}  // namespace

SourceSet load_source_set(const fs::path& path, const SchemaRegistry& registry) {
  const nlohmann::json j = read_json_file(path);
  const fs::path base = path.parent_path();
  try {
    SourceSet set;
    set.dataset_id = j.at("dataset_id").get<std::string>();
    set.schema = registry.get(j.at("schema").get<std::string>());
    set.handedness = handedness_from_json(j.value("handedness", nlohmann::json::object()));
    std::optional<SchemaMapping> gt_mapping;
    if (j.contains("gt_mapping")) {
      const auto spec = j.at("gt_mapping").get<std::string>();
      gt_mapping = resolve_mapping(
          spec.starts_with("builtin:") ? spec : resolve(base, spec).string(), registry);
    }
    for (const auto& s : j.value("scenes", nlohmann::json::array())) {
      SceneSample scene;
      scene.dataset_id = set.dataset_id;
      scene.sample_id = s.at("id").get<std::string>();
      const auto& cam = s.at("camera");
      scene.camera = cam.is_string() ? load_camera(resolve(base, cam.get<std::string>()))
                                     : camera_from_json(cam);
      for (const auto& f : s.at("reference_frames"))
        scene.reference_frame_paths.push_back(resolve(base, f.get<std::string>()));
      if (s.contains("root_position")) scene.root_position = vec3(s.at("root_position"));
      if (s.contains("facing")) scene.facing = vec3(s.at("facing"));
      scene.ground_height = s.value("ground_height", 0.0);
      scene.validate();
      set.scenes.push_back(std::move(scene));
    }
    for (const auto& m : j.value("motions", nlohmann::json::array())) {
      Pose3DSequence motion = read_pose3d(resolve(base, m.at("file").get<std::string>()), registry);
      if (!same_schema(motion.schema(), *set.schema))
        throw Error(ErrorCode::SchemaMismatch, "motion " + m.at("id").get<std::string>() +
                                                   " is stored in " + motion.schema().name +
                                                   ", dataset declares " + set.schema->name);
      if (gt_mapping) motion = map_schema_3d(motion, *gt_mapping);
      motion.set_frame_tag(FrameTag::World);
      set.motions.push_back(
          MotionSample{set.dataset_id, m.at("id").get<std::string>(), std::move(motion),
                       set.handedness});
    }
    if (gt_mapping) set.schema = gt_mapping->target;
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Validation, path.string() + ": " + e.what());
  }
}

void PipelineConfig::validate() const {
  if (sources.empty()) throw Error(ErrorCode::Validation, "config lists no sources");
  if (!(filter_fraction > 0.0 && filter_fraction <= 1.0))
    throw Error(ErrorCode::Validation, "filter_fraction must lie in (0, 1]");
  if (!(max_outside_fraction >= 0.0 && max_outside_fraction <= 1.0))
    throw Error(ErrorCode::Validation, "max_outside_fraction must lie in [0, 1]");
  if (generator.type != "mock" && generator.type != "external")
    throw Error(ErrorCode::Validation, "generator type must be mock or external");
  if (generator.type == "external" && generator.command.empty())
    throw Error(ErrorCode::Validation, "external generator needs a command");
  if (detector.type != "synthetic" && detector.type != "external")
    throw Error(ErrorCode::Validation, "detector type must be synthetic or external");
  if (detector.type == "external" && detector.command.empty())
    throw Error(ErrorCode::Validation, "external detector needs a command");
  if (workers == 0) throw Error(ErrorCode::Validation, "workers must be >= 1");
  generator.knob.validate();
  detector.noise.validate();
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json src = nlohmann::json::array();
  for (const auto& s : sources) src.push_back(s.generic_string());
  nlohmann::json pairing_json{{"mode", posefuse::to_string(pairing.mode)}};
  pairing_json["subsample"] = pairing.subsample ? nlohmann::json(*pairing.subsample)
                                                : nlohmann::json();
  nlohmann::json gen{{"type", generator.type}};
  if (generator.type == "mock")
    gen["knob"] = posefuse::to_json(generator.knob);
  else
    gen["command"] = generator.command;
  nlohmann::json det{{"type", detector.type}};
  if (detector.type == "synthetic")
    det["noise"] = posefuse::to_json(detector.noise);
  else
    det["command"] = detector.command;
  return {{"sources", src},
          {"pairing", pairing_json},
          {"guidance_mapping", guidance_mapping},
          {"generator", gen},
          {"detector", det},
          {"filter_fraction", filter_fraction},
          {"max_outside_fraction", max_outside_fraction},
          {"seed", seed}};
}

std::string PipelineConfig::digest() const {
  const std::string text = to_json().dump();
  return sha256_hex({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  try {
    PipelineConfig c;
    for (const auto& s : j.at("sources")) c.sources.push_back(resolve(base_dir, s.get<std::string>()));
    if (j.contains("pairing")) {
      const auto& p = j.at("pairing");
      c.pairing.mode = pairing_mode_from_string(p.value("mode", "all"));
      if (p.contains("subsample") && !p.at("subsample").is_null())
        c.pairing.subsample = p.at("subsample").get<std::size_t>();
    }
    c.guidance_mapping = j.value("guidance_mapping", c.guidance_mapping);
    if (c.guidance_mapping.rfind("builtin:", 0) != 0)
      c.guidance_mapping = resolve(base_dir, c.guidance_mapping).string();
    if (j.contains("generator")) {
      const auto& g = j.at("generator");
      c.generator.type = g.value("type", "mock");
      if (g.contains("knob")) c.generator.knob = knob_from_json(g.at("knob"));
      c.generator.command = g.value("command", "");
    }
    if (j.contains("detector")) {
      const auto& d = j.at("detector");
      c.detector.type = d.value("type", "synthetic");
      if (d.contains("noise")) c.detector.noise = noise_from_json(d.at("noise"));
      c.detector.command = d.value("command", "");
    }
    c.filter_fraction = j.value("filter_fraction", c.filter_fraction);
    c.max_outside_fraction = j.value("max_outside_fraction", c.max_outside_fraction);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("malformed pipeline config: ") + e.what());
  }
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  return pipeline_config_from_json(read_json_file(path), fs::absolute(path).parent_path());
}

Pipeline::Pipeline(PipelineConfig config, fs::path out_dir, SchemaRegistry registry)
    : config_(std::move(config)), out_(fs::absolute(out_dir)), registry_(std::move(registry)) {
  config_.validate();
  mapping_ = resolve_mapping(config_.guidance_mapping, registry_);
  fs::create_directories(out_);
}

void Pipeline::load_manifest() {
  manifest_ = read_manifest(out_ / kManifestName);
  if (manifest_.config_digest != config_.digest())
    throw Error(ErrorCode::Validation,
                "manifest in " + out_.string() + " was produced by a different config");
}

void Pipeline::save_manifest() {
  manifest_.created_at = utc_timestamp();
  write_manifest(out_ / kManifestName, manifest_);
}

StageStats Pipeline::fuse() {
  std::vector<SourceSet> sources;
  for (const auto& p : config_.sources) sources.push_back(load_source_set(p, registry_));
  std::vector<SceneSample> scenes;
  std::vector<MotionSample> motions;
  Manifest fresh;
  fresh.config_digest = config_.digest();
  fresh.guidance_mapping = to_json(mapping_);
  for (const auto& s : sources) {
    if (!same_schema(*s.schema, *mapping_.source))
      throw Error(ErrorCode::SchemaMismatch, "dataset " + s.dataset_id + " uses " +
                                                 s.schema->name + ", guidance mapping expects " +
                                                 mapping_.source->name);
    fresh.source_datasets.push_back({s.dataset_id, s.schema->name, s.handedness});
    scenes.insert(scenes.end(), s.scenes.begin(), s.scenes.end());
    motions.insert(motions.end(), s.motions.begin(), s.motions.end());
  }

  std::optional<Manifest> prior;
  if (fs::exists(out_ / kManifestName)) {
    try {
      Manifest m = read_manifest(out_ / kManifestName);
      if (m.config_digest == fresh.config_digest) prior = std::move(m);
    } catch (const Error&) {
    }
  }

  PairingPolicy policy = config_.pairing;
  policy.seed = derive_seed(config_.seed, "pairing");
  const auto pairs = plan_pairs(scenes, motions, policy);
  const FusionOptions options{mapping_, config_.max_outside_fraction};

  std::vector<ManifestSample> results(pairs.size());
  std::vector<std::vector<std::string>> warnings(pairs.size());
  std::vector<char> skipped(pairs.size(), 0);
  parallel_for(pairs.size(), config_.workers, [&](std::size_t i) {
    const auto& pair = pairs[i];
    const SceneSample& scene = scenes[pair.scene_index];
    const MotionSample& motion = motions[pair.motion_index];
    if (prior) {
      if (const ManifestSample* old = prior->find(pair.id)) {
        if (old->status == SampleStatus::Rejected) {
          results[i] = *old;
          skipped[i] = 1;
          return;
        }
        if (verify_all(out_, *old, {kGtWorldFile, kGtCameraFile, kGuidanceFile})) {
          results[i] = *old;
          if (old->status == SampleStatus::Failed) reset_after(results[i], SampleStatus::Fused);
          skipped[i] = 1;
          return;
        }
      }
    }
    ManifestSample& entry = results[i];
    entry.id = pair.id;
    entry.scene_ref = {scene.dataset_id, scene.sample_id};
    entry.motion_ref = {motion.dataset_id, motion.sample_id};
    entry.camera = scene.camera;
    for (const auto& p : scene.reference_frame_paths) entry.reference_frames.push_back(p.string());
    FusedOutcome outcome = fuse_sample(scene, motion, pair.id, options);
    entry.warnings = outcome.warnings;
    warnings[i] = std::move(outcome.warnings);
    if (!outcome.sample) {
      entry.status = SampleStatus::Rejected;
      entry.reason = "fuse: " + outcome.rejection;
      return;
    }
    try {
      const fs::path dir = out_ / "samples" / pair.id;
      fs::create_directories(dir);
      write_pose(dir / "gt_world.pseq", outcome.sample->gt_3d_world);
      write_pose(dir / "gt_camera.pseq", outcome.sample->gt_3d_camera);
      write_pose(dir / "guidance.pseq", outcome.sample->guidance_2d);
      entry.files[kGtWorldFile] = make_file_entry(out_, dir / "gt_world.pseq");
      entry.files[kGtCameraFile] = make_file_entry(out_, dir / "gt_camera.pseq");
      entry.files[kGuidanceFile] = make_file_entry(out_, dir / "guidance.pseq");
      entry.alignment = outcome.sample->alignment;
      entry.status = SampleStatus::Fused;
    } catch (const Error& e) {
      entry.status = SampleStatus::Failed;
      entry.reason = failure_reason("fuse", e);
    } catch (const std::exception& e) {
      entry.status = SampleStatus::Failed;
      entry.reason = std::string("fuse: ") + e.what();
    }
  });

  StageStats stats;
  fresh.samples = std::move(results);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (auto& w : warnings[i]) warnings_.push_back(std::move(w));
    if (skipped[i])
      ++stats.skipped;
    else if (fresh.samples[i].status == SampleStatus::Fused)
      ++stats.processed;
    else
      ++stats.failed;
  }
  fresh.sort_samples();
  manifest_ = std::move(fresh);
  save_manifest();
  return stats;
}

template <typename Work>
StageStats Pipeline::run_stage(SampleStatus from, SampleStatus to, const char* stage, Work&& work) {
  load_manifest();
  auto& samples = manifest_.samples;
  std::vector<int> state(samples.size(), 0);  // 0 idle, 1 skipped, 2 done, 3 failed
  parallel_for(samples.size(), config_.workers, [&](std::size_t i) {
    ManifestSample& s = samples[i];
    const int rank = stage_rank(s.status);
    if (rank < stage_rank(from)) return;
    if (rank >= stage_rank(to) && work.up_to_date(s)) {
      state[i] = 1;
      return;
    }
    reset_after(s, from);
    try {
      work.run(s);
      s.status = to;
      state[i] = 2;
    } catch (const Error& e) {
      s.status = SampleStatus::Failed;
      s.reason = failure_reason(stage, e);
      state[i] = 3;
    } catch (const std::exception& e) {
      s.status = SampleStatus::Failed;
      s.reason = std::string(stage) + ": " + e.what();
      state[i] = 3;
    }
  });
  StageStats stats;
  for (int st : state) {
    stats.skipped += st == 1;
    stats.processed += st == 2;
    stats.failed += st == 3;
  }
  save_manifest();
  return stats;
}

StageStats Pipeline::generate() {
  struct Work {
    Pipeline& p;
    bool up_to_date(const ManifestSample& s) const {
      if (s.frames.empty()) return false;
      for (const auto& f : s.frames)
        if (!verify_file_entry(p.out_, f)) return false;
      auto it = s.files.find(kGeneratorTruthFile);
      return it == s.files.end() || verify_file_entry(p.out_, it->second);
    }
    void run(ManifestSample& s) const {
      const fs::path dir = p.out_ / "samples" / s.id / "frames";
      GeneratorRequest req{
          .reference_frame_paths = {},
          .guidance = read_pose2d(p.out_ / s.file(kGuidanceFile).path, p.registry_),
          .output_dir = dir,
          .seed = derive_seed(p.config_.seed, "generate/" + s.id),
          .image_width = s.camera->image_width,
          .image_height = s.camera->image_height,
      };
      for (const auto& r : s.reference_frames) req.reference_frame_paths.emplace_back(r);
      const auto adapter = make_generator(p.config_.generator, p.mapping_.target);
      posefuse::generate(req, *adapter);
      for (const auto& f : list_frames(dir)) s.frames.push_back(make_file_entry(p.out_, f));
      if (fs::exists(dir / kSidecarName))
        s.files[kGeneratorTruthFile] = make_file_entry(p.out_, dir / kSidecarName);
    }
  };
  return run_stage(SampleStatus::Fused, SampleStatus::Generated, "generate", Work{*this});
}

StageStats Pipeline::detect() {
  struct Work {
    Pipeline& p;
    bool up_to_date(const ManifestSample& s) const { return verify_all(p.out_, s, {kDetectedFile}); }
    void run(ManifestSample& s) const {
      const fs::path dir = p.out_ / "samples" / s.id;
      const auto adapter = make_detector(p.config_.detector, p.mapping_.target,
                                         derive_seed(p.config_.seed, "detect/" + s.id));
      const Pose2DSequence detected = posefuse::detect(dir / "frames", *adapter);
      write_pose(dir / "detected.pseq", detected);
      s.files[kDetectedFile] = make_file_entry(p.out_, dir / "detected.pseq");
    }
  };
  return run_stage(SampleStatus::Generated, SampleStatus::Detected, "detect", Work{*this});
}

StageStats Pipeline::score() {
  struct Work {
    Pipeline& p;
    bool up_to_date(const ManifestSample& s) const {
      return s.score.has_value() && verify_all(p.out_, s, {"quality"});
    }
    void run(ManifestSample& s) const {
      const auto detected = read_pose2d(p.out_ / s.file(kDetectedFile).path, p.registry_);
      const auto truth = read_pose2d(p.out_ / s.file(kGuidanceFile).path, p.registry_);
      const QualityReport report = score_sample(detected, truth, *s.camera, s.id);
      const fs::path file = p.out_ / "samples" / s.id / "quality.json";
      write_text(file, posefuse::to_json(report).dump(2) + "\n");
      s.files["quality"] = make_file_entry(p.out_, file);
      s.score = report.score;
    }
  };
  return run_stage(SampleStatus::Detected, SampleStatus::Scored, "score", Work{*this});
}

FilterOutcome Pipeline::filter() {
  load_manifest();
  std::vector<QualityReport> reports;
  std::vector<ManifestSample*> scored;
  for (auto& s : manifest_.samples) {
    if (stage_rank(s.status) < stage_rank(SampleStatus::Scored)) continue;
    QualityReport r = quality_report_from_json(read_json_file(out_ / s.file("quality").path));
    r.score = *s.score;
    reports.push_back(std::move(r));
    scored.push_back(&s);
  }
  if (reports.empty()) throw Error(ErrorCode::EmptyCorpus, "no scored samples to filter");

  FilterOutcome outcome;
  outcome.kept_ids = filter_top(reports, config_.filter_fraction);
  std::vector<double> all, kept;
  std::string lines;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    scored[i]->status = reports[i].kept ? SampleStatus::Kept : SampleStatus::FilteredOut;
    all.push_back(reports[i].score);
    if (reports[i].kept) kept.push_back(reports[i].score);
    lines += to_json(reports[i]).dump() + "\n";
  }
  outcome.unfiltered = summarize(all);
  outcome.filtered = summarize(kept);
  write_text(out_ / "reports.jsonl", lines);
  std::string ids;
  for (const auto& id : outcome.kept_ids) ids += id + "\n";
  write_text(out_ / "kept_ids.txt", ids);
  write_text(out_ / "filter_summary.json",
             nlohmann::json{{"fraction", config_.filter_fraction},
                            {"kept_ids", outcome.kept_ids},
                            {"unfiltered", to_json(outcome.unfiltered)},
                            {"filtered", to_json(outcome.filtered)}}
                     .dump(2) +
                 "\n");
  save_manifest();
  return outcome;
}

PipelineReport run_pipeline(const PipelineConfig& config, const fs::path& out_dir,
                            const SchemaRegistry& registry) {
  Pipeline p(config, out_dir, registry);
  PipelineReport report;
  for (auto stage : {&Pipeline::fuse, &Pipeline::generate, &Pipeline::detect, &Pipeline::score})
    report.skipped += (p.*stage)().skipped;
  const Manifest& m = p.manifest();
  if (m.count(SampleStatus::Failed) + m.count(SampleStatus::Rejected) == m.samples.size())
    throw Error(ErrorCode::EmptyCorpus,
                "all " + std::to_string(m.samples.size()) + " samples failed or were rejected");
  report.filter = p.filter();
  report.manifest = p.manifest();
  report.attempted = report.manifest.samples.size();
  report.kept = report.manifest.count(SampleStatus::Kept);
  report.filtered_out = report.manifest.count(SampleStatus::FilteredOut);
  report.failed = report.manifest.count(SampleStatus::Failed);
  report.rejected = report.manifest.count(SampleStatus::Rejected);
  report.warnings = p.warnings();
  return report;
}

Channel channel_from_string(std::string_view s) {
  if (s == "GT" || s == "gt") return Channel::GT;
  if (s == "HPE" || s == "hpe") return Channel::HPE;
  throw Error(ErrorCode::Validation, "channel must be GT or HPE, got '" + std::string(s) + "'");
}

std::string_view to_string(Channel c) { return c == Channel::GT ? "GT" : "HPE"; }

void export_training_set(const Manifest& manifest, const fs::path& manifest_dir, Channel channel,
                         const fs::path& out_dir) {
  const char* role = channel == Channel::GT ? kGuidanceFile : kDetectedFile;
  std::vector<const ManifestSample*> kept;
  for (const auto& s : manifest.samples)
    if (s.status == SampleStatus::Kept) {
      if (!s.files.contains(role))
        throw Error(ErrorCode::MissingChannel, "kept sample " + s.id + " has no " +
                                                   std::string(to_string(channel)) + " channel");
      kept.push_back(&s);
    }
  if (kept.empty()) throw Error(ErrorCode::EmptyCorpus, "manifest has no kept samples");
  fs::create_directories(out_dir);
  nlohmann::json pairs = nlohmann::json::array();
  std::string input_schema, target_schema;
  for (const auto* s : kept) {
    const auto input = read_file_bytes(manifest_dir / s->file(role).path);
    const auto target = read_file_bytes(manifest_dir / s->file(kGtCameraFile).path);
    const PoseTensor in_t = decode_pose_tensor(input);
    const PoseTensor tg_t = decode_pose_tensor(target);
    if (input_schema.empty()) {
      input_schema = in_t.schema;
      target_schema = tg_t.schema;
    } else if (in_t.schema != input_schema || tg_t.schema != target_schema) {
      throw Error(ErrorCode::SchemaMismatch, "sample " + s->id + " uses different schemas");
    }
    write_file_bytes(out_dir / (s->id + ".input.pseq"), input);
    write_file_bytes(out_dir / (s->id + ".target.pseq"), target);
    pairs.push_back({{"id", s->id},
                     {"input", s->id + ".input.pseq"},
                     {"target", s->id + ".target.pseq"},
                     {"image_width", s->camera->image_width},
                     {"image_height", s->camera->image_height}});
  }
  write_text(out_dir / "index.json", nlohmann::json{{"channel", to_string(channel)},
                                                    {"input_schema", input_schema},
                                                    {"target_schema", target_schema},
                                                    {"pairs", pairs}}
                                             .dump(2) +
                                         "\n");
}

TrainingSet load_training_set(const fs::path& dir, const SchemaRegistry& registry) {
  const nlohmann::json index = read_json_file(dir / "index.json");
  TrainingSet set;
  try {
    set.channel = channel_from_string(index.at("channel").get<std::string>());
    for (const auto& p : index.at("pairs")) {
      set.ids.push_back(p.at("id").get<std::string>());
      set.inputs.push_back(read_pose2d(dir / p.at("input").get<std::string>(), registry));
      set.targets.push_back(read_pose3d(dir / p.at("target").get<std::string>(), registry));
      set.image_widths.push_back(p.value("image_width", 1000));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, "malformed training index: " + std::string(e.what()));
  }
  return set;
}

RegimeCorpus regime_corpus_from_manifest(const Manifest& manifest, const fs::path& manifest_dir,
                                         const SchemaRegistry& registry, bool include_filtered) {
  RegimeCorpus corpus;
  for (const auto& s : manifest.samples) {
    const bool wanted = s.status == SampleStatus::Kept ||
                        (include_filtered && s.status == SampleStatus::FilteredOut);
    if (!wanted) continue;
    corpus.push_back(RegimeSequence{
        .id = s.id,
        .gt2d = read_pose2d(manifest_dir / s.file(kGuidanceFile).path, registry),
        .hpe2d = read_pose2d(manifest_dir / s.file(kDetectedFile).path, registry),
        .target = read_pose3d(manifest_dir / s.file(kGtCameraFile).path, registry),
        .image_width = s.camera->image_width,
    });
  }
  return corpus;
}

}  // namespace posefuse
