#include "posefuse/synth.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <unordered_map>

#include "posefuse/error.hpp"
#include "posefuse/rng.hpp"
#include "posefuse/tensor_io.hpp"

namespace posefuse {

namespace fs = std::filesystem;

namespace {

constexpr Rgb kBoneColor{235, 235, 235};
constexpr Rgb kFallbackBackground{128, 128, 128};

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw Error(ErrorCode::InvalidInput, std::string(what) + " must lie in [0, 1]");
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

int run_command(const std::string& command, const fs::path& request) {
  const int status = std::system((command + " " + shell_quote(request.string())).c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void clear_frames(const fs::path& dir) {
  for (const auto& f : list_frames(dir)) fs::remove(f);
}

}  // namespace

void DetectorNoiseConfig::validate() const {
  if (!(gaussian_sigma >= 0.0) || !std::isfinite(gaussian_sigma))
    throw Error(ErrorCode::InvalidInput, "gaussian_sigma must be finite and >= 0");
  check_probability(outlier_prob, "outlier_prob");
  check_probability(miss_prob, "miss_prob");
  if (!(outlier_radius_min < outlier_radius_max) || outlier_radius_min < 0.0)
    throw Error(ErrorCode::InvalidInput, "outlier radius needs 0 <= min < max");
}

DetectorNoiseConfig noise_from_json(const nlohmann::json& j) {
  DetectorNoiseConfig cfg;
  cfg.gaussian_sigma = j.value("gaussian_sigma", cfg.gaussian_sigma);
  cfg.outlier_prob = j.value("outlier_prob", cfg.outlier_prob);
  if (j.contains("outlier_radius")) {
    const auto r = j.at("outlier_radius").get<std::vector<double>>();
    if (r.size() != 2) throw Error(ErrorCode::InvalidInput, "outlier_radius needs [min, max]");
    cfg.outlier_radius_min = r[0];
    cfg.outlier_radius_max = r[1];
  }
  cfg.miss_prob = j.value("miss_prob", cfg.miss_prob);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const DetectorNoiseConfig& cfg) {
  return {{"gaussian_sigma", cfg.gaussian_sigma},
          {"outlier_prob", cfg.outlier_prob},
          {"outlier_radius", {cfg.outlier_radius_min, cfg.outlier_radius_max}},
          {"miss_prob", cfg.miss_prob},
          {"seed", cfg.seed}};
}

void CorruptionKnob::validate() const {
  if (!std::isfinite(pose_drift_sigma) || pose_drift_sigma < 0.0)
    throw Error(ErrorCode::InvalidInput, "pose_drift_sigma must be finite and >= 0");
  if (!(drift_correlation >= 0.0 && drift_correlation < 1.0))
    throw Error(ErrorCode::InvalidInput, "drift_correlation must lie in [0, 1)");
  check_probability(failure_prob, "failure_prob");
}

CorruptionKnob knob_from_json(const nlohmann::json& j) {
  CorruptionKnob k;
  k.pose_drift_sigma = j.value("pose_drift_sigma", k.pose_drift_sigma);
  k.drift_correlation = j.value("drift_correlation", k.drift_correlation);
  k.failure_prob = j.value("failure_prob", k.failure_prob);
  k.validate();
  return k;
}

nlohmann::json to_json(const CorruptionKnob& k) {
  return {{"pose_drift_sigma", k.pose_drift_sigma},
          {"drift_correlation", k.drift_correlation},
          {"failure_prob", k.failure_prob}};
}

std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.png", index);
  return buf;
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  std::vector<fs::path> frames;
  if (!fs::is_directory(dir)) return frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("frame_") && name.ends_with(".png"))
      frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end());
  return frames;
}

Rgb marker_color(std::size_t joint, std::size_t joint_count) {
  const double h = 6.0 * static_cast<double>(joint) / static_cast<double>(joint_count);
  const int sector = static_cast<int>(h);
  const auto ramp = static_cast<std::uint8_t>(std::lround(255.0 * (h - sector)));
  const auto fall = static_cast<std::uint8_t>(255 - ramp);
  switch (sector % 6) {
    case 0: return {255, ramp, 0};
    case 1: return {fall, 255, 0};
    case 2: return {0, 255, ramp};
    case 3: return {0, fall, 255};
    case 4: return {ramp, 0, 255};
    default: return {255, 0, fall};
  }
}

MockGenerator::MockGenerator(SchemaPtr schema, CorruptionKnob knob)
    : schema_(std::move(schema)), knob_(knob) {
  knob_.validate();
}

Pose2DSequence MockGenerator::realize(const GeneratorRequest& req) const {
  Pose2DSequence out = req.guidance;
  Rng rng(derive_seed(req.seed, "mock-generator"));
  const bool failed = rng.bernoulli(knob_.failure_prob);
  if (!failed || knob_.pose_drift_sigma == 0.0) return out;
  const double sigma = knob_.pose_drift_sigma * req.image_width / 2000.0;
  const double rho = knob_.drift_correlation;
  const double innovation = sigma * std::sqrt(1.0 - rho * rho);
  std::vector<Eigen::Vector2d> drift(out.joints());
  for (auto& d : drift) d = Eigen::Vector2d(sigma * rng.normal(), sigma * rng.normal());
  for (std::size_t t = 0; t < out.frames(); ++t) {
    for (std::size_t j = 0; j < out.joints(); ++j) {
      if (t > 0)
        drift[j] = rho * drift[j] +
                   Eigen::Vector2d(innovation * rng.normal(), innovation * rng.normal());
      if (out.confidence(t, j) > 0.0) out(t, j) += drift[j];
    }
  }
  return out;
}

void MockGenerator::run(const GeneratorRequest& req) const {
  const Pose2DSequence realized = realize(req);
  write_pose(req.output_dir / kSidecarName, realized);

  Image background(req.image_width, req.image_height, kFallbackBackground);
  if (!req.reference_frame_paths.empty())
    if (auto ref = try_read_png(req.reference_frame_paths.front()))
      background = resize_nearest(*ref, req.image_width, req.image_height);

  const double scale = req.image_width / 2000.0;
  const double bone_width = std::max(2.0, 8.0 * scale);
  const double radius = std::max(3.0, 7.0 * scale);
  const auto& bones = schema_->bones;
  for (std::size_t t = 0; t < realized.frames(); ++t) {
    Image frame = background;
    for (auto [p, c] : bones)
      if (realized.confidence(t, p) > 0.0 && realized.confidence(t, c) > 0.0)
        draw_line(frame, realized(t, p), realized(t, c), bone_width, kBoneColor);
    for (std::size_t j = 0; j < realized.joints(); ++j)
      if (realized.confidence(t, j) > 0.0)
        draw_disc(frame, realized(t, j), radius, marker_color(j, realized.joints()));
    write_png(req.output_dir / frame_file_name(t), frame);
  }
}

ExternalGenerator::ExternalGenerator(std::string command, SchemaPtr schema)
    : command_(std::move(command)), schema_(std::move(schema)) {}

void ExternalGenerator::run(const GeneratorRequest& req) const {
  const fs::path guidance = req.output_dir / "guidance.pseq";
  write_pose(guidance, req.guidance);
  nlohmann::json refs = nlohmann::json::array();
  for (const auto& p : req.reference_frame_paths) refs.push_back(fs::absolute(p).string());
  const fs::path request = req.output_dir / "request.json";
  write_json(request, {{"reference_frames", refs},
                       {"guidance_file", fs::absolute(guidance).string()},
                       {"output_dir", fs::absolute(req.output_dir).string()},
                       {"seed", req.seed},
                       {"image_width", req.image_width},
                       {"image_height", req.image_height},
                       {"schema", schema_->name}});
  const int code = run_command(command_, request);
  if (code != 0)
    throw Error(ErrorCode::AdapterFailure,
                "generator command exited with status " + std::to_string(code));
}

fs::path generate(const GeneratorRequest& req, const GeneratorAdapter& adapter) {
  if (!same_schema(req.guidance.schema(), adapter.schema()))
    throw Error(ErrorCode::SchemaMismatch, "guidance schema " + req.guidance.schema().name +
                                               " does not match generator schema " +
                                               adapter.schema().name);
  if (req.reference_frame_paths.empty())
    throw Error(ErrorCode::MissingInput, "generator request has no reference frames");
  for (const auto& p : req.reference_frame_paths)
    if (!fs::is_regular_file(p))
      throw Error(ErrorCode::MissingInput, "reference frame " + p.string() + " not found");
  fs::create_directories(req.output_dir);
  clear_frames(req.output_dir);
  adapter.run(req);
  const auto frames = list_frames(req.output_dir);
  if (frames.size() != req.guidance.frames())
    throw Error(ErrorCode::FrameCountMismatch,
                "generator produced " + std::to_string(frames.size()) + " frames for " +
                    std::to_string(req.guidance.frames()) + " guidance frames");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].filename() != frame_file_name(t))
      throw Error(ErrorCode::UnreadableOutput, "unexpected frame file " + frames[t].string());
    if (!try_read_png(frames[t]))
      throw Error(ErrorCode::UnreadableOutput, "cannot decode " + frames[t].string());
  }
  return req.output_dir;
}

fs::path mock_generate(const GeneratorRequest& req, const CorruptionKnob& knob) {
  return generate(req, MockGenerator(req.guidance.schema_ptr(), knob));
}

MarkerDetector::MarkerDetector(SchemaPtr schema, DetectorNoiseConfig noise)
    : schema_(std::move(schema)), noise_(noise) {
  noise_.validate();
}

Pose2DSequence MarkerDetector::locate(const std::vector<fs::path>& frames, int* width) const {
  const std::size_t joints = schema_->size();
  std::unordered_map<std::uint32_t, std::size_t> lookup;
  for (std::size_t j = 0; j < joints; ++j) {
    const Rgb c = marker_color(j, joints);
    lookup.emplace((std::uint32_t{c[0]} << 16) | (std::uint32_t{c[1]} << 8) | c[2], j);
  }
  Pose2DSequence out(schema_, frames.size());
  std::vector<Eigen::Vector2d> sum(joints);
  std::vector<std::size_t> count(joints);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Image image = read_png(frames[t]);
    if (width) *width = image.width;
    std::fill(sum.begin(), sum.end(), Eigen::Vector2d::Zero());
    std::fill(count.begin(), count.end(), 0);
    const auto* px = image.pixels.data();
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x, px += 3) {
        // Markers are fully saturated: one channel 0 and another 255.
        const bool has0 = px[0] == 0 || px[1] == 0 || px[2] == 0;
        const bool has255 = px[0] == 255 || px[1] == 255 || px[2] == 255;
        if (!has0 || !has255) continue;
        auto it = lookup.find((std::uint32_t{px[0]} << 16) | (std::uint32_t{px[1]} << 8) | px[2]);
        if (it == lookup.end()) continue;
        sum[it->second] += Eigen::Vector2d(x + 0.5, y + 0.5);
        ++count[it->second];
      }
    }
    for (std::size_t j = 0; j < joints; ++j) {
      if (count[j] > 0) {
        out(t, j) = sum[j] / static_cast<double>(count[j]);
        out.confidence(t, j) = 1.0;
      } else {
        out(t, j) = t > 0 ? out(t - 1, j) : Eigen::Vector2d::Zero();
        out.confidence(t, j) = 0.0;
      }
    }
  }
  return out;
}

Pose2DSequence MarkerDetector::run(const fs::path&, const std::vector<fs::path>& frames) const {
  int width = 0;
  const Pose2DSequence located = locate(frames, &width);
  return synth_detect(located, noise_, width);
}

ExternalDetector::ExternalDetector(std::string command, SchemaPtr schema, std::uint64_t seed)
    : command_(std::move(command)), schema_(std::move(schema)), seed_(seed) {}

Pose2DSequence ExternalDetector::run(const fs::path& frames_dir,
                                     const std::vector<fs::path>&) const {
  const fs::path keypoints = frames_dir / "detected.pseq";
  fs::remove(keypoints);
  const fs::path request = frames_dir / "detect_request.json";
  write_json(request, {{"frames_dir", fs::absolute(frames_dir).string()},
                       {"keypoints_file", fs::absolute(keypoints).string()},
                       {"seed", seed_},
                       {"schema", schema_->name}});
  const int code = run_command(command_, request);
  if (code != 0)
    throw Error(ErrorCode::AdapterFailure,
                "detector command exited with status " + std::to_string(code));
  if (!fs::is_regular_file(keypoints))
    throw Error(ErrorCode::UnreadableOutput, "detector wrote no keypoints file");
  SchemaRegistry registry;
  registry.add(schema_);
  return read_pose2d(keypoints, registry);
}

Pose2DSequence detect(const fs::path& frames_dir, const DetectorAdapter& adapter) {
  if (!fs::is_directory(frames_dir))
    throw Error(ErrorCode::MissingInput, "frame directory " + frames_dir.string() + " not found");
  const auto frames = list_frames(frames_dir);
  if (frames.empty())
    throw Error(ErrorCode::MissingInput, "no frames in " + frames_dir.string());
  Pose2DSequence out = adapter.run(frames_dir, frames);
  if (!same_schema(out.schema(), adapter.schema()))
    throw Error(ErrorCode::SchemaMismatch, "detector replied in schema " + out.schema().name +
                                               ", expected " + adapter.schema().name);
  if (out.frames() != frames.size())
    throw Error(ErrorCode::ShapeMismatch, "detector returned " + std::to_string(out.frames()) +
                                              " frames for " + std::to_string(frames.size()));
  out.check_valid();
  return out;
}

Pose2DSequence synth_detect(const Pose2DSequence& truth, const DetectorNoiseConfig& cfg,
                            int image_width) {
  cfg.validate();
  if (image_width <= 0) throw Error(ErrorCode::InvalidInput, "image width must be positive");
  truth.check_valid();
  const double scale = image_width / 2000.0;
  Rng rng(cfg.seed);
  Pose2DSequence out = truth;
  for (std::size_t t = 0; t < truth.frames(); ++t) {
    for (std::size_t j = 0; j < truth.joints(); ++j) {
      if (truth.confidence(t, j) <= 0.0) continue;
      const double sigma = scale * cfg.gaussian_sigma;
      Eigen::Vector2d p = truth(t, j) + Eigen::Vector2d(sigma * rng.normal(), sigma * rng.normal());
      if (rng.bernoulli(cfg.outlier_prob)) {
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double r = scale * rng.uniform(cfg.outlier_radius_min, cfg.outlier_radius_max);
        p += r * Eigen::Vector2d(std::cos(angle), std::sin(angle));
      }
      if (rng.bernoulli(cfg.miss_prob)) {
        out.confidence(t, j) = std::min(truth.confidence(t, j), 0.1);
        if (t > 0) p = out(t - 1, j);
      }
      out(t, j) = p;
    }
  }
  return out;
}

}  // namespace posefuse
