#include "posefuse/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>

#include <openssl/evp.h>

#include "posefuse/error.hpp"
#include "posefuse/tensor_io.hpp"

namespace posefuse {

namespace fs = std::filesystem;

namespace {

constexpr std::pair<SampleStatus, std::string_view> kStatusNames[] = {
    {SampleStatus::Fused, "fused"},           {SampleStatus::Generated, "generated"},
    {SampleStatus::Detected, "detected"},     {SampleStatus::Scored, "scored"},
    {SampleStatus::Kept, "kept"},             {SampleStatus::FilteredOut, "filtered_out"},
    {SampleStatus::Failed, "failed"},         {SampleStatus::Rejected, "rejected"},
};

nlohmann::json to_json(const FileEntry& f) { return {{"path", f.path}, {"sha256", f.sha256}}; }

FileEntry file_entry_from_json(const nlohmann::json& j) {
  return {j.at("path").get<std::string>(), j.at("sha256").get<std::string>()};
}

nlohmann::json to_json(const AlignmentTransform& a) {
  std::vector<double> w;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) w.push_back(a.rotation_w(r, c));
  return {{"rotation_w", w},
          {"translation", {a.translation.x(), a.translation.y(), a.translation.z()}}};
}

AlignmentTransform alignment_from_json(const nlohmann::json& j) {
  const auto w = j.at("rotation_w").get<std::vector<double>>();
  const auto t = j.at("translation").get<std::vector<double>>();
  if (w.size() != 9 || t.size() != 3)
    throw Error(ErrorCode::FormatError, "alignment needs 9 rotation and 3 translation values");
  AlignmentTransform a;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.rotation_w(r, c) = w[3 * r + c];
  a.translation = {t[0], t[1], t[2]};
  return a;
}

nlohmann::json to_json(const ManifestSample& s) {
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [role, entry] : s.files) files[role] = to_json(entry);
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : s.frames) frames.push_back(to_json(f));
  nlohmann::json j{{"id", s.id},
                   {"status", to_string(s.status)},
                   {"reason", s.reason},
                   {"scene_ref", {{"dataset", s.scene_ref.dataset}, {"sample", s.scene_ref.sample}}},
                   {"motion_ref",
                    {{"dataset", s.motion_ref.dataset}, {"sample", s.motion_ref.sample}}},
                   {"cross_domain", s.cross_domain()},
                   {"reference_frames", s.reference_frames},
                   {"files", files},
                   {"frames", frames},
                   {"warnings", s.warnings}};
  j["camera"] = s.camera ? to_json(*s.camera) : nlohmann::json();
  j["alignment"] = s.alignment ? to_json(*s.alignment) : nlohmann::json();
  j["score"] = s.score ? nlohmann::json(*s.score) : nlohmann::json();
  j["kept"] = s.status == SampleStatus::Kept;
  return j;
}

ManifestSample sample_from_json(const nlohmann::json& j) {
  ManifestSample s;
  s.id = j.at("id").get<std::string>();
  s.status = sample_status_from_string(j.at("status").get<std::string>());
  s.reason = j.value("reason", "");
  s.scene_ref = {j.at("scene_ref").at("dataset").get<std::string>(),
                 j.at("scene_ref").at("sample").get<std::string>()};
  s.motion_ref = {j.at("motion_ref").at("dataset").get<std::string>(),
                  j.at("motion_ref").at("sample").get<std::string>()};
  if (j.contains("camera") && !j.at("camera").is_null()) s.camera = camera_from_json(j.at("camera"));
  if (j.contains("alignment") && !j.at("alignment").is_null())
    s.alignment = alignment_from_json(j.at("alignment"));
  s.reference_frames = j.value("reference_frames", std::vector<std::string>{});
  if (j.contains("files"))
    for (const auto& [role, entry] : j.at("files").items())
      s.files[role] = file_entry_from_json(entry);
  if (j.contains("frames"))
    for (const auto& f : j.at("frames")) s.frames.push_back(file_entry_from_json(f));
  if (j.contains("score") && !j.at("score").is_null()) s.score = j.at("score").get<double>();
  s.warnings = j.value("warnings", std::vector<std::string>{});
  return s;
}

// Bound on |guidance - recomputed| caused by float32 storage of both the
// camera-frame joints (relative error 2^-24 per coordinate, which the
// perspective division roughly doubles) and the stored pixel values.
struct ProjectedJoint {
  Eigen::Vector2d uv;
  Eigen::Vector2d bound;
};

ProjectedJoint project_with_bound(const Eigen::Vector3d& p, const CameraModel& cam) {
  constexpr double kUnit = 0x1.0p-24;
  const double du = cam.fx * p.x() / p.z();
  const double dv = cam.fy * p.y() / p.z();
  return {{du + cam.cx, dv + cam.cy}, {2.0 * kUnit * std::abs(du), 2.0 * kUnit * std::abs(dv)}};
}

void check_guidance_consistency(const ManifestSample& s, const fs::path& root,
                                const SchemaMapping& mapping, const SchemaRegistry& registry,
                                std::vector<ValidationIssue>& issues) {
  constexpr double kUnit = 0x1.0p-24;
  constexpr double kBaseTolerance = 1e-6;  // px
  const Pose3DSequence gt = read_pose3d(root / s.file(kGtCameraFile).path, registry);
  const Pose2DSequence guidance = read_pose2d(root / s.file(kGuidanceFile).path, registry);
  if (!same_schema(gt.schema(), *mapping.source) || !same_schema(guidance.schema(), *mapping.target)) {
    issues.push_back({s.id, "stored poses do not match the guidance mapping schemas"});
    return;
  }
  if (gt.frames() != guidance.frames()) {
    issues.push_back({s.id, "ground truth and guidance frame counts differ"});
    return;
  }
  const CameraModel& cam = *s.camera;
  double worst = 0.0;
  for (std::size_t t = 0; t < gt.frames(); ++t) {
    for (std::size_t k = 0; k < mapping.assignments.size(); ++k) {
      const auto& a = mapping.assignments[k];
      if (a.kind == Assignment::Kind::Drop) {
        if (guidance.confidence(t, k) != 0.0)
          issues.push_back({s.id, "dropped guidance joint " + guidance.schema().joints[k] +
                                      " has non-zero confidence at frame " + std::to_string(t)});
        continue;
      }
      if (gt(t, a.first).z() <= 0.0 || gt(t, a.second).z() <= 0.0) {
        issues.push_back({s.id, "ground truth behind the camera at frame " + std::to_string(t)});
        return;
      }
      ProjectedJoint expect = project_with_bound(gt(t, a.first), cam);
      if (a.kind == Assignment::Kind::Midpoint) {
        const ProjectedJoint other = project_with_bound(gt(t, a.second), cam);
        expect.uv = 0.5 * (expect.uv + other.uv);
        expect.bound = expect.bound.cwiseMax(other.bound);
      }
      const Eigen::Vector2d stored = guidance(t, k);
      const Eigen::Vector2d tol =
          Eigen::Vector2d::Constant(kBaseTolerance) +
          2.0 * (expect.bound + kUnit * stored.cwiseAbs());
      const Eigen::Vector2d diff = (stored - expect.uv).cwiseAbs();
      if ((diff.array() > tol.array()).any()) worst = std::max(worst, diff.maxCoeff());
    }
  }
  if (worst > 0.0)
    issues.push_back({s.id, "guidance deviates from projected ground truth by " +
                                std::to_string(worst) + " px"});
}

}  // namespace

std::string_view to_string(SampleStatus status) {
  for (const auto& [s, name] : kStatusNames)
    if (s == status) return name;
  return "unknown";
}

SampleStatus sample_status_from_string(std::string_view s) {
  for (const auto& [status, name] : kStatusNames)
    if (name == s) return status;
  throw Error(ErrorCode::FormatError, "unknown sample status '" + std::string(s) + "'");
}

int stage_rank(SampleStatus status) {
  switch (status) {
    case SampleStatus::Fused: return 1;
    case SampleStatus::Generated: return 2;
    case SampleStatus::Detected: return 3;
    case SampleStatus::Scored: return 4;
    case SampleStatus::Kept:
    case SampleStatus::FilteredOut: return 5;
    case SampleStatus::Failed:
    case SampleStatus::Rejected: return 0;
  }
  return 0;
}

const FileEntry& ManifestSample::file(const std::string& role) const {
  auto it = files.find(role);
  if (it == files.end())
    throw Error(ErrorCode::MissingChannel, "sample " + id + " has no " + role + " file");
  return it->second;
}

const ManifestSample* Manifest::find(std::string_view id) const {
  for (const auto& s : samples)
    if (s.id == id) return &s;
  return nullptr;
}

ManifestSample* Manifest::find(std::string_view id) {
  for (auto& s : samples)
    if (s.id == id) return &s;
  return nullptr;
}

void Manifest::sort_samples() {
  std::sort(samples.begin(), samples.end(),
            [](const ManifestSample& a, const ManifestSample& b) { return a.id < b.id; });
}

std::size_t Manifest::count(SampleStatus status) const {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [&](const ManifestSample& s) { return s.status == status; }));
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::Io, "SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file_bytes(path)); }

FileEntry make_file_entry(const fs::path& root, const fs::path& file) {
  return {fs::relative(file, root).generic_string(), sha256_file(file)};
}

bool verify_file_entry(const fs::path& root, const FileEntry& entry) {
  const fs::path p = root / entry.path;
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) return false;
  try {
    return sha256_file(p) == entry.sha256;
  } catch (const Error&) {
    return false;
  }
}

nlohmann::json to_json(const Manifest& m, bool with_timestamp) {
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& d : m.source_datasets)
    sources.push_back({{"dataset_id", d.dataset_id},
                       {"schema", d.schema},
                       {"handedness", to_json(d.handedness)}});
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : m.samples) samples.push_back(to_json(s));
  nlohmann::json j{{"version", m.version},
                   {"convention", m.convention},
                   {"config_digest", m.config_digest},
                   {"source_datasets", sources},
                   {"guidance_mapping", m.guidance_mapping},
                   {"samples", samples}};
  if (with_timestamp) j["created_at"] = m.created_at;
  return j;
}

Manifest manifest_from_json(const nlohmann::json& j) {
  try {
    Manifest m;
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion)
      throw Error(ErrorCode::FormatError, "unsupported manifest version " +
                                              std::to_string(m.version));
    m.convention = j.at("convention").get<std::string>();
    if (m.convention != kCameraConvention)
      throw Error(ErrorCode::FormatError, "unsupported camera convention " + m.convention);
    m.created_at = j.value("created_at", "");
    m.config_digest = j.value("config_digest", "");
    for (const auto& d : j.at("source_datasets"))
      m.source_datasets.push_back({d.at("dataset_id").get<std::string>(),
                                   d.at("schema").get<std::string>(),
                                   handedness_from_json(d.at("handedness"))});
    m.guidance_mapping = j.value("guidance_mapping", nlohmann::json());
    for (const auto& s : j.at("samples")) m.samples.push_back(sample_from_json(s));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const fs::path& path, Manifest manifest) {
  manifest.sort_samples();
  if (manifest.created_at.empty()) manifest.created_at = utc_timestamp();
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << to_json(manifest).dump(2) << '\n';
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Manifest read_manifest(const fs::path& path) {
  if (!fs::is_regular_file(path))
    throw Error(ErrorCode::MissingInput, "manifest " + path.string() + " not found");
  return manifest_from_json(read_json_file(path));
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<ValidationIssue> validate_manifest(const Manifest& manifest, const fs::path& root,
                                               const SchemaRegistry& registry) {
  std::vector<ValidationIssue> issues;
  std::set<std::string> seen;
  for (const auto& s : manifest.samples)
    if (!seen.insert(s.id).second) issues.push_back({s.id, "duplicate sample id"});

  std::optional<SchemaMapping> mapping;
  if (!manifest.guidance_mapping.is_null()) {
    try {
      mapping = mapping_from_json(manifest.guidance_mapping, registry);
    } catch (const Error& e) {
      issues.push_back({"", std::string("guidance mapping: ") + e.what()});
    }
  }

  for (const auto& s : manifest.samples) {
    bool files_ok = true;
    auto check = [&](const std::string& what, const FileEntry& f) {
      std::error_code ec;
      if (!fs::is_regular_file(root / f.path, ec)) {
        issues.push_back({s.id, what + " missing: " + f.path});
        files_ok = false;
      } else if (sha256_file(root / f.path) != f.sha256) {
        issues.push_back({s.id, what + " hash mismatch: " + f.path});
        files_ok = false;
      }
    };
    for (const auto& [role, f] : s.files) check(role, f);
    for (const auto& f : s.frames) check("frame", f);

    if (s.status != SampleStatus::Kept) continue;
    for (const char* role : {kGtWorldFile, kGtCameraFile, kGuidanceFile, kDetectedFile})
      if (!s.files.contains(role)) {
        issues.push_back({s.id, std::string("kept sample lacks ") + role});
        files_ok = false;
      }
    if (s.frames.empty()) {
      issues.push_back({s.id, "kept sample lacks generated frames"});
      files_ok = false;
    }
    if (!s.score) issues.push_back({s.id, "kept sample lacks a score"});
    if (!s.camera) {
      issues.push_back({s.id, "kept sample lacks a camera"});
      files_ok = false;
    }
    if (files_ok && mapping) {
      try {
        check_guidance_consistency(s, root, *mapping, registry, issues);
      } catch (const Error& e) {
        issues.push_back({s.id, e.what()});
      }
    }
  }
  return issues;
}

}  // namespace posefuse
