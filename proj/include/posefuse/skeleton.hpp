#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace posefuse {

using IndexPair = std::pair<std::size_t, std::size_t>;

struct JointSchema {
  std::string name;
  std::vector<std::string> joints;
  std::size_t root_index = 0;
  std::vector<IndexPair> bones;  // (parent, child)
  std::vector<IndexPair> left_right_pairs;
  std::vector<std::size_t> foot_indices;
  // Joint whose distance from the root sets the 2D torso scale used by the
  // lifter features. Optional for schemas that are never lifted from.
  std::optional<std::size_t> torso_index;

  std::size_t size() const { return joints.size(); }
  std::optional<std::size_t> find(std::string_view joint) const;
  std::size_t index_of(std::string_view joint) const;

  // Unique names, indices in range, bones form a tree rooted at root_index.
  void validate() const;
};

using SchemaPtr = std::shared_ptr<const JointSchema>;

bool same_schema(const JointSchema& a, const JointSchema& b);

SchemaPtr make_schema(JointSchema schema);

/// Human3.6M 17-joint layout (pelvis root).
SchemaPtr h36m17();
/// The 17 body joints of COCO-WholeBody, used as generator guidance.
SchemaPtr coco_body();

SchemaPtr schema_from_json(const nlohmann::json& j);
nlohmann::json to_json(const JointSchema& schema);

// Resolves schema names found in files; knows the built-ins.
class SchemaRegistry {
 public:
  SchemaRegistry();
  void add(SchemaPtr schema);
  SchemaPtr get(std::string_view name) const;
  bool contains(std::string_view name) const;

 private:
  std::vector<SchemaPtr> schemas_;
};

enum class FrameTag { World, Camera };

std::string_view to_string(FrameTag tag);

class Pose3DSequence {
 public:
  Pose3DSequence(SchemaPtr schema, std::size_t frames, FrameTag tag);

  std::size_t frames() const { return frames_; }
  std::size_t joints() const { return schema_->size(); }
  const JointSchema& schema() const { return *schema_; }
  const SchemaPtr& schema_ptr() const { return schema_; }
  FrameTag frame_tag() const { return tag_; }
  void set_frame_tag(FrameTag tag) { tag_ = tag; }

  Eigen::Vector3d& operator()(std::size_t t, std::size_t j) { return data_[t * joints() + j]; }
  const Eigen::Vector3d& operator()(std::size_t t, std::size_t j) const {
    return data_[t * joints() + j];
  }
  std::span<const Eigen::Vector3d> frame(std::size_t t) const {
    return {data_.data() + t * joints(), joints()};
  }
  const std::vector<Eigen::Vector3d>& data() const { return data_; }

  // Throws InvalidInput naming the first non-finite frame/joint.
  void check_finite() const;

 private:
  SchemaPtr schema_;
  std::size_t frames_;
  FrameTag tag_;
  std::vector<Eigen::Vector3d> data_;
};

class Pose2DSequence {
 public:
  // Positions start at zero with confidence 1.
  Pose2DSequence(SchemaPtr schema, std::size_t frames);

  std::size_t frames() const { return frames_; }
  std::size_t joints() const { return schema_->size(); }
  const JointSchema& schema() const { return *schema_; }
  const SchemaPtr& schema_ptr() const { return schema_; }

  Eigen::Vector2d& operator()(std::size_t t, std::size_t j) { return data_[t * joints() + j]; }
  const Eigen::Vector2d& operator()(std::size_t t, std::size_t j) const {
    return data_[t * joints() + j];
  }
  double& confidence(std::size_t t, std::size_t j) { return confidence_[t * joints() + j]; }
  double confidence(std::size_t t, std::size_t j) const { return confidence_[t * joints() + j]; }

  const std::vector<Eigen::Vector2d>& data() const { return data_; }
  const std::vector<double>& confidences() const { return confidence_; }

  // Finite positions, confidence within [0, 1].
  void check_valid() const;

 private:
  SchemaPtr schema_;
  std::size_t frames_;
  std::vector<Eigen::Vector2d> data_;
  std::vector<double> confidence_;
};

struct Assignment {
  enum class Kind { Copy, Midpoint, Drop };
  Kind kind = Kind::Drop;
  std::size_t first = 0;
  std::size_t second = 0;

  static Assignment copy(std::size_t source) { return {Kind::Copy, source, source}; }
  static Assignment midpoint(std::size_t a, std::size_t b) { return {Kind::Midpoint, a, b}; }
  static Assignment drop() { return {}; }
};

// assignments[k] fills target joint k.
struct SchemaMapping {
  SchemaPtr source;
  SchemaPtr target;
  std::vector<Assignment> assignments;

  void validate() const;
};

/// Direct copies for every target joint whose name exists in the source,
/// everything else dropped.
SchemaMapping mapping_by_name(SchemaPtr source, SchemaPtr target);
SchemaMapping identity_mapping(SchemaPtr schema);

/// h36m-17 to coco-body: shared limbs copied, nose from head, eyes/ears dropped.
SchemaMapping h36m_to_coco();
/// coco-body to h36m-17 (2D only): pelvis/thorax/neck as midpoints, spine dropped.
SchemaMapping coco_to_h36m();

// Accepts "builtin:h36m-17->coco-body" style names or a mapping file path.
SchemaMapping resolve_mapping(std::string_view spec, const SchemaRegistry& registry);

SchemaMapping mapping_from_json(const nlohmann::json& j, const SchemaRegistry& registry);
nlohmann::json to_json(const SchemaMapping& mapping);

Pose2DSequence map_schema_2d(const Pose2DSequence& kps, const SchemaMapping& mapping);
// Drop entries are rejected: 3D ground truth has to stay complete.
Pose3DSequence map_schema_3d(const Pose3DSequence& pose, const SchemaMapping& mapping);

std::vector<double> bone_lengths(const Pose3DSequence& pose, std::size_t frame = 0);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace posefuse
