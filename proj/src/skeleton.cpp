#include "posefuse/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "posefuse/error.hpp"

namespace posefuse {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidInput, msg); }

std::size_t resolve_joint(const JointSchema& schema, const nlohmann::json& ref) {
  if (ref.is_number_integer()) {
    const auto idx = ref.get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= schema.size())
      invalid("joint index " + std::to_string(idx) + " out of range for schema " + schema.name);
    return static_cast<std::size_t>(idx);
  }
  if (ref.is_string()) return schema.index_of(ref.get<std::string>());
  invalid("joint reference must be an index or a name");
}

std::vector<IndexPair> pairs_from_json(const nlohmann::json& j) {
  std::vector<IndexPair> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) invalid("expected [a, b] index pair");
    out.emplace_back(p[0].get<std::size_t>(), p[1].get<std::size_t>());
  }
  return out;
}

}  // namespace

std::optional<std::size_t> JointSchema::find(std::string_view joint) const {
  auto it = std::find(joints.begin(), joints.end(), joint);
  if (it == joints.end()) return std::nullopt;
  return static_cast<std::size_t>(it - joints.begin());
}

std::size_t JointSchema::index_of(std::string_view joint) const {
  if (auto idx = find(joint)) return *idx;
  invalid("schema " + name + " has no joint named '" + std::string(joint) + "'");
}

void JointSchema::validate() const {
  if (name.empty()) invalid("schema name is empty");
  if (joints.empty()) invalid("schema " + name + " has no joints");
  const std::size_t n = joints.size();
  std::set<std::string> seen;
  for (const auto& j : joints)
    if (!seen.insert(j).second) invalid("schema " + name + ": duplicate joint name '" + j + "'");
  auto check = [&](std::size_t idx, const char* what) {
    if (idx >= n)
      invalid("schema " + name + ": " + what + " index " + std::to_string(idx) + " out of range");
  };
  check(root_index, "root");
  if (torso_index) check(*torso_index, "torso");
  for (auto [a, b] : left_right_pairs) {
    check(a, "pair");
    check(b, "pair");
  }
  for (auto f : foot_indices) check(f, "foot");

  if (bones.size() != n - 1)
    invalid("schema " + name + ": bones must form a tree (" + std::to_string(n - 1) +
            " bones expected, got " + std::to_string(bones.size()) + ")");
  std::vector<int> parent(n, -1);
  for (auto [p, c] : bones) {
    check(p, "bone");
    check(c, "bone");
    if (c == root_index) invalid("schema " + name + ": root joint cannot be a bone child");
    if (parent[c] != -1) invalid("schema " + name + ": joint " + joints[c] + " has two parents");
    parent[c] = static_cast<int>(p);
  }
  // Every joint must reach the root through parent links without cycling.
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t cur = j;
    for (std::size_t steps = 0; cur != root_index; ++steps) {
      if (parent[cur] < 0 || steps > n)
        invalid("schema " + name + ": joint " + joints[j] + " is not connected to the root");
      cur = static_cast<std::size_t>(parent[cur]);
    }
  }
}

bool same_schema(const JointSchema& a, const JointSchema& b) {
  return &a == &b || (a.name == b.name && a.joints == b.joints);
}

SchemaPtr make_schema(JointSchema schema) {
  schema.validate();
  return std::make_shared<const JointSchema>(std::move(schema));
}

SchemaPtr h36m17() {
  static const SchemaPtr schema = make_schema(JointSchema{
      .name = "h36m-17",
      .joints = {"pelvis", "right_hip", "right_knee", "right_ankle", "left_hip", "left_knee",
                 "left_ankle", "spine", "thorax", "neck", "head", "left_shoulder", "left_elbow",
                 "left_wrist", "right_shoulder", "right_elbow", "right_wrist"},
      .root_index = 0,
      .bones = {{0, 1}, {1, 2}, {2, 3}, {0, 4}, {4, 5}, {5, 6}, {0, 7}, {7, 8},
                {8, 9}, {9, 10}, {8, 11}, {11, 12}, {12, 13}, {8, 14}, {14, 15}, {15, 16}},
      .left_right_pairs = {{4, 1}, {5, 2}, {6, 3}, {11, 14}, {12, 15}, {13, 16}},
      .foot_indices = {3, 6},
      .torso_index = 9,
  });
  return schema;
}

SchemaPtr coco_body() {
  static const SchemaPtr schema = make_schema(JointSchema{
      .name = "coco-body",
      .joints = {"nose", "left_eye", "right_eye", "left_ear", "right_ear", "left_shoulder",
                 "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
                 "left_hip", "right_hip", "left_knee", "right_knee", "left_ankle", "right_ankle"},
      .root_index = 11,
      .bones = {{11, 12}, {11, 13}, {13, 15}, {12, 14}, {14, 16}, {11, 5}, {5, 6}, {5, 7},
                {7, 9}, {6, 8}, {8, 10}, {5, 0}, {0, 1}, {0, 2}, {1, 3}, {2, 4}},
      .left_right_pairs = {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}, {11, 12}, {13, 14}, {15, 16}},
      .foot_indices = {15, 16},
      .torso_index = 5,
  });
  return schema;
}

SchemaPtr schema_from_json(const nlohmann::json& j) {
  try {
    JointSchema s;
    s.name = j.at("name").get<std::string>();
    s.joints = j.at("joints").get<std::vector<std::string>>();
    s.root_index = j.at("root").get<std::size_t>();
    s.bones = pairs_from_json(j.at("bones"));
    if (j.contains("pairs")) s.left_right_pairs = pairs_from_json(j.at("pairs"));
    if (j.contains("feet")) s.foot_indices = j.at("feet").get<std::vector<std::size_t>>();
    if (j.contains("torso") && !j.at("torso").is_null())
      s.torso_index = j.at("torso").get<std::size_t>();
    return make_schema(std::move(s));
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("malformed schema JSON: ") + e.what());
  }
}

nlohmann::json to_json(const JointSchema& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["joints"] = s.joints;
  j["root"] = s.root_index;
  j["bones"] = s.bones;
  j["pairs"] = s.left_right_pairs;
  j["feet"] = s.foot_indices;
  j["torso"] = s.torso_index ? nlohmann::json(*s.torso_index) : nlohmann::json();
  return j;
}

SchemaRegistry::SchemaRegistry() : schemas_{h36m17(), coco_body()} {}

void SchemaRegistry::add(SchemaPtr schema) {
  for (auto& s : schemas_) {
    if (s->name == schema->name) {
      if (!same_schema(*s, *schema))
        throw Error(ErrorCode::SchemaMismatch,
                    "conflicting definitions for schema " + schema->name);
      return;
    }
  }
  schemas_.push_back(std::move(schema));
}

SchemaPtr SchemaRegistry::get(std::string_view name) const {
  for (const auto& s : schemas_)
    if (s->name == name) return s;
  throw Error(ErrorCode::SchemaMismatch, "unknown schema '" + std::string(name) + "'");
}

bool SchemaRegistry::contains(std::string_view name) const {
  return std::any_of(schemas_.begin(), schemas_.end(),
                     [&](const SchemaPtr& s) { return s->name == name; });
}

std::string_view to_string(FrameTag tag) { return tag == FrameTag::World ? "world" : "camera"; }

Pose3DSequence::Pose3DSequence(SchemaPtr schema, std::size_t frames, FrameTag tag)
    : schema_(std::move(schema)), frames_(frames), tag_(tag) {
  if (!schema_) invalid("pose sequence needs a schema");
  if (frames_ == 0) invalid("pose sequence needs at least one frame");
  data_.assign(frames_ * schema_->size(), Eigen::Vector3d::Zero());
}

void Pose3DSequence::check_finite() const {
  for (std::size_t t = 0; t < frames_; ++t)
    for (std::size_t j = 0; j < joints(); ++j)
      if (!(*this)(t, j).allFinite())
        invalid("non-finite coordinate at frame " + std::to_string(t) + ", joint " +
                std::to_string(j));
}

Pose2DSequence::Pose2DSequence(SchemaPtr schema, std::size_t frames)
    : schema_(std::move(schema)), frames_(frames) {
  if (!schema_) invalid("pose sequence needs a schema");
  if (frames_ == 0) invalid("pose sequence needs at least one frame");
  data_.assign(frames_ * schema_->size(), Eigen::Vector2d::Zero());
  confidence_.assign(frames_ * schema_->size(), 1.0);
}

void Pose2DSequence::check_valid() const {
  for (std::size_t t = 0; t < frames_; ++t) {
    for (std::size_t j = 0; j < joints(); ++j) {
      const double c = confidence(t, j);
      if (!(*this)(t, j).allFinite() || !std::isfinite(c))
        invalid("non-finite keypoint at frame " + std::to_string(t) + ", joint " +
                std::to_string(j));
      if (c < 0.0 || c > 1.0)
        invalid("confidence outside [0,1] at frame " + std::to_string(t) + ", joint " +
                std::to_string(j));
    }
  }
}

void SchemaMapping::validate() const {
  if (!source || !target) invalid("mapping needs source and target schemas");
  if (assignments.size() != target->size())
    invalid("mapping " + source->name + "->" + target->name + " assigns " +
            std::to_string(assignments.size()) + " of " + std::to_string(target->size()) +
            " target joints");
  for (std::size_t k = 0; k < assignments.size(); ++k) {
    const auto& a = assignments[k];
    if (a.kind == Assignment::Kind::Drop) continue;
    if (a.first >= source->size() || a.second >= source->size())
      invalid("mapping target joint " + target->joints[k] + " references an invalid source index");
  }
}

SchemaMapping mapping_by_name(SchemaPtr source, SchemaPtr target) {
  SchemaMapping m{source, target, {}};
  for (const auto& name : target->joints) {
    auto idx = source->find(name);
    m.assignments.push_back(idx ? Assignment::copy(*idx) : Assignment::drop());
  }
  return m;
}

SchemaMapping identity_mapping(SchemaPtr schema) { return mapping_by_name(schema, schema); }

SchemaMapping h36m_to_coco() {
  auto m = mapping_by_name(h36m17(), coco_body());
  m.assignments[coco_body()->index_of("nose")] = Assignment::copy(h36m17()->index_of("head"));
  return m;
}

SchemaMapping coco_to_h36m() {
  const auto& coco = *coco_body();
  const auto& h36m = *h36m17();
  auto m = mapping_by_name(coco_body(), h36m17());
  const auto hips = Assignment::midpoint(coco.index_of("left_hip"), coco.index_of("right_hip"));
  const auto shoulders =
      Assignment::midpoint(coco.index_of("left_shoulder"), coco.index_of("right_shoulder"));
  m.assignments[h36m.index_of("pelvis")] = hips;
  m.assignments[h36m.index_of("thorax")] = shoulders;
  m.assignments[h36m.index_of("neck")] = shoulders;
  m.assignments[h36m.index_of("head")] = Assignment::copy(coco.index_of("nose"));
  return m;
}

SchemaMapping resolve_mapping(std::string_view spec, const SchemaRegistry& registry) {
  constexpr std::string_view prefix = "builtin:";
  if (spec.starts_with(prefix)) {
    const auto name = spec.substr(prefix.size());
    if (name == "h36m-17->coco-body") return h36m_to_coco();
    if (name == "coco-body->h36m-17") return coco_to_h36m();
    const auto arrow = name.find("->");
    if (arrow != std::string_view::npos) {
      auto src = registry.get(name.substr(0, arrow));
      auto dst = registry.get(name.substr(arrow + 2));
      if (same_schema(*src, *dst)) return identity_mapping(src);
      return mapping_by_name(src, dst);
    }
    invalid("unknown builtin mapping '" + std::string(name) + "'");
  }
  return mapping_from_json(read_json_file(std::filesystem::path(spec)), registry);
}

SchemaMapping mapping_from_json(const nlohmann::json& j, const SchemaRegistry& registry) {
  try {
    SchemaMapping m;
    m.source = registry.get(j.at("source").get<std::string>());
    m.target = registry.get(j.at("target").get<std::string>());
    std::vector<std::optional<Assignment>> slots(m.target->size());
    for (const auto& entry : j.at("assignments")) {
      const std::size_t k = resolve_joint(*m.target, entry.at("target"));
      if (slots[k])
        invalid("mapping assigns target joint " + m.target->joints[k] + " more than once");
      if (entry.contains("copy")) {
        slots[k] = Assignment::copy(resolve_joint(*m.source, entry.at("copy")));
      } else if (entry.contains("midpoint")) {
        const auto& mp = entry.at("midpoint");
        if (!mp.is_array() || mp.size() != 2) invalid("midpoint needs two source joints");
        slots[k] = Assignment::midpoint(resolve_joint(*m.source, mp[0]),
                                        resolve_joint(*m.source, mp[1]));
      } else if (entry.value("drop", false)) {
        slots[k] = Assignment::drop();
      } else {
        invalid("mapping entry for " + m.target->joints[k] + " has no copy/midpoint/drop rule");
      }
    }
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (!slots[k]) invalid("mapping leaves target joint " + m.target->joints[k] + " unassigned");
      m.assignments.push_back(*slots[k]);
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("malformed mapping JSON: ") + e.what());
  }
}

nlohmann::json to_json(const SchemaMapping& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t k = 0; k < m.assignments.size(); ++k) {
    const auto& a = m.assignments[k];
    nlohmann::json e{{"target", m.target->joints[k]}};
    switch (a.kind) {
      case Assignment::Kind::Copy: e["copy"] = m.source->joints[a.first]; break;
      case Assignment::Kind::Midpoint:
        e["midpoint"] = {m.source->joints[a.first], m.source->joints[a.second]};
        break;
      case Assignment::Kind::Drop: e["drop"] = true; break;
    }
    entries.push_back(std::move(e));
  }
  return {{"source", m.source->name}, {"target", m.target->name}, {"assignments", entries}};
}

Pose2DSequence map_schema_2d(const Pose2DSequence& kps, const SchemaMapping& mapping) {
  mapping.validate();
  if (!same_schema(kps.schema(), *mapping.source))
    throw Error(ErrorCode::SchemaMismatch, "keypoints use schema " + kps.schema().name +
                                               " but mapping expects " + mapping.source->name);
  Pose2DSequence out(mapping.target, kps.frames());
  for (std::size_t t = 0; t < kps.frames(); ++t) {
    for (std::size_t k = 0; k < mapping.assignments.size(); ++k) {
      const auto& a = mapping.assignments[k];
      switch (a.kind) {
        case Assignment::Kind::Copy:
          out(t, k) = kps(t, a.first);
          out.confidence(t, k) = kps.confidence(t, a.first);
          break;
        case Assignment::Kind::Midpoint:
          out(t, k) = 0.5 * (kps(t, a.first) + kps(t, a.second));
          out.confidence(t, k) = std::min(kps.confidence(t, a.first), kps.confidence(t, a.second));
          break;
        case Assignment::Kind::Drop:
          out(t, k).setZero();
          out.confidence(t, k) = 0.0;
          break;
      }
    }
  }
  return out;
}

Pose3DSequence map_schema_3d(const Pose3DSequence& pose, const SchemaMapping& mapping) {
  mapping.validate();
  if (!same_schema(pose.schema(), *mapping.source))
    throw Error(ErrorCode::SchemaMismatch, "pose uses schema " + pose.schema().name +
                                               " but mapping expects " + mapping.source->name);
  for (std::size_t k = 0; k < mapping.assignments.size(); ++k)
    if (mapping.assignments[k].kind == Assignment::Kind::Drop)
      invalid("3D mapping cannot drop joint " + mapping.target->joints[k]);
  Pose3DSequence out(mapping.target, pose.frames(), pose.frame_tag());
  for (std::size_t t = 0; t < pose.frames(); ++t) {
    for (std::size_t k = 0; k < mapping.assignments.size(); ++k) {
      const auto& a = mapping.assignments[k];
      out(t, k) = a.kind == Assignment::Kind::Copy ? pose(t, a.first)
                                                   : Eigen::Vector3d(0.5 * (pose(t, a.first) +
                                                                            pose(t, a.second)));
    }
  }
  return out;
}

std::vector<double> bone_lengths(const Pose3DSequence& pose, std::size_t frame) {
  if (frame >= pose.frames())
    invalid("frame " + std::to_string(frame) + " out of range for bone lengths");
  std::vector<double> out;
  out.reserve(pose.schema().bones.size());
  for (auto [p, c] : pose.schema().bones) out.push_back((pose(frame, c) - pose(frame, p)).norm());
  return out;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidInput, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace posefuse
