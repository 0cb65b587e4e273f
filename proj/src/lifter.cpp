#include "posefuse/lifter.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>

#include "posefuse/error.hpp"
#include "posefuse/metrics.hpp"
#include "posefuse/rng.hpp"

namespace posefuse {

namespace {

constexpr double kMinReciprocalCondition = 1e-13;

std::size_t torso_of(const JointSchema& schema) {
  if (!schema.torso_index)
    throw Error(ErrorCode::InvalidInput,
                "schema " + schema.name + " has no torso joint; it cannot feed the lifter");
  return *schema.torso_index;
}

Eigen::VectorXd root_relative_target(const Pose3DSequence& pose, std::size_t t) {
  const std::size_t joints = pose.joints();
  const Eigen::Vector3d root = pose(t, pose.schema().root_index);
  Eigen::VectorXd y(3 * joints);
  for (std::size_t j = 0; j < joints; ++j) y.segment<3>(3 * j) = pose(t, j) - root;
  return y;
}

void check_pairs(const std::vector<Pose2DSequence>& inputs,
                 const std::vector<Pose3DSequence>& targets) {
  if (inputs.size() != targets.size())
    throw Error(ErrorCode::ShapeMismatch, "lifter inputs and targets differ in count");
  if (inputs.empty()) throw Error(ErrorCode::InvalidInput, "lifter needs training sequences");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].frames() != targets[i].frames())
      throw Error(ErrorCode::ShapeMismatch,
                  "sequence " + std::to_string(i) + ": input and target frame counts differ");
    if (!same_schema(inputs[i].schema(), inputs[0].schema()) ||
        !same_schema(targets[i].schema(), targets[0].schema()))
      throw Error(ErrorCode::SchemaMismatch,
                  "sequence " + std::to_string(i) + " uses a different schema");
  }
}

}  // namespace

std::optional<Eigen::VectorXd> lifter_features(const Pose2DSequence& kps, std::size_t t,
                                               std::size_t center_index, std::size_t scale_index,
                                               double min_torso_scale) {
  const std::size_t joints = kps.joints();
  const Eigen::Vector2d center = kps(t, center_index);
  const double scale = (kps(t, scale_index) - center).norm();
  if (!(scale >= min_torso_scale) || kps.confidence(t, center_index) <= 0.0 ||
      kps.confidence(t, scale_index) <= 0.0)
    return std::nullopt;
  // The centre joint is identically zero after centring and is left out.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * (joints - 1) + 1);
  for (std::size_t j = 0, k = 0; j < joints; ++j) {
    if (j == center_index) continue;
    if (kps.confidence(t, j) > 0.0) x.segment<2>(2 * k) = (kps(t, j) - center) / scale;
    ++k;
  }
  x(x.size() - 1) = 1.0;
  return x;
}

LifterModel fit(const std::vector<Pose2DSequence>& inputs,
                const std::vector<Pose3DSequence>& targets, double lambda,
                std::vector<std::string>* warnings) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidInput, "lambda must be >= 0");
  check_pairs(inputs, targets);
  LifterModel model;
  model.lambda = lambda;
  model.input_schema = inputs[0].schema_ptr();
  model.output_schema = targets[0].schema_ptr();
  model.center_index = model.input_schema->root_index;
  model.scale_index = torso_of(*model.input_schema);

  const auto in_dim = static_cast<Eigen::Index>(2 * (model.input_schema->size() - 1) + 1);
  const auto out_dim = static_cast<Eigen::Index>(3 * model.output_schema->size());
  Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(in_dim, in_dim);
  Eigen::MatrixXd atb = Eigen::MatrixXd::Zero(in_dim, out_dim);
  std::size_t used = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t t = 0; t < inputs[i].frames(); ++t) {
      auto x = lifter_features(inputs[i], t, model.center_index, model.scale_index,
                               model.min_torso_scale);
      if (!x) {
        if (warnings)
          warnings->push_back("sequence " + std::to_string(i) + " frame " + std::to_string(t) +
                              ": degenerate torso scale, frame dropped");
        continue;
      }
      ata.selfadjointView<Eigen::Lower>().rankUpdate(*x);
      atb.noalias() += *x * root_relative_target(targets[i], t).transpose();
      ++used;
    }
  }
  if (used == 0) throw Error(ErrorCode::InvalidInput, "no usable training frames");
  ata = ata.selfadjointView<Eigen::Lower>();
  ata.diagonal().array() += lambda;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
  const Eigen::VectorXd pivots = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      !(pivots.minCoeff() > kMinReciprocalCondition * pivots.maxCoeff()) ||
      ldlt.rcond() < kMinReciprocalCondition)
    throw Error(ErrorCode::RankDeficient,
                "normal equations are singular with lambda = " + std::to_string(lambda) +
                    " (" + std::to_string(used) + " frames); use lambda > 0");
  model.weights = ldlt.solve(atb);
  return model;
}

Pose3DSequence predict(const LifterModel& model, const Pose2DSequence& kps,
                       std::vector<std::string>* warnings) {
  if (!same_schema(kps.schema(), *model.input_schema))
    throw Error(ErrorCode::SchemaMismatch, "lifter expects " + model.input_schema->name +
                                               " keypoints, got " + kps.schema().name);
  Pose3DSequence out(model.output_schema, kps.frames(), FrameTag::Camera);
  for (std::size_t t = 0; t < kps.frames(); ++t) {
    auto x = lifter_features(kps, t, model.center_index, model.scale_index, model.min_torso_scale);
    if (!x) {
      if (warnings)
        warnings->push_back("frame " + std::to_string(t) + ": degenerate torso scale");
      continue;
    }
    const Eigen::VectorXd y = model.weights.transpose() * *x;
    for (std::size_t j = 0; j < out.joints(); ++j) out(t, j) = y.segment<3>(3 * j);
  }
  return out;
}

double training_mse(const LifterModel& model, const std::vector<Pose2DSequence>& inputs,
                    const std::vector<Pose3DSequence>& targets) {
  check_pairs(inputs, targets);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t t = 0; t < inputs[i].frames(); ++t) {
      auto x = lifter_features(inputs[i], t, model.center_index, model.scale_index,
                               model.min_torso_scale);
      if (!x) continue;
      const Eigen::VectorXd r =
          model.weights.transpose() * *x - root_relative_target(targets[i], t);
      sum += r.squaredNorm();
      count += static_cast<std::size_t>(r.size());
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

nlohmann::json to_json(const LifterModel& m) {
  std::vector<double> w(m.weights.data(), m.weights.data() + m.weights.size());
  return {{"rows", m.weights.rows()},
          {"cols", m.weights.cols()},
          {"weights_col_major", w},
          {"lambda", m.lambda},
          {"input_schema", m.input_schema->name},
          {"output_schema", m.output_schema->name},
          {"input_norm",
           {{"center_joint", m.input_schema->joints[m.center_index]},
            {"scale_joint", m.input_schema->joints[m.scale_index]},
            {"min_torso_scale", m.min_torso_scale}}}};
}

std::string Regime::label() const {
  auto name = [](Input2D i) { return i == Input2D::GT ? "GT" : "HPE"; };
  return std::string("(") + name(train) + "," + name(test) + ")";
}

std::vector<Regime> all_regimes() {
  return {{Input2D::GT, Input2D::GT},
          {Input2D::HPE, Input2D::GT},
          {Input2D::GT, Input2D::HPE},
          {Input2D::HPE, Input2D::HPE}};
}

const RegimeRow& RegimeTable::row(Regime r) const {
  for (const auto& row : rows)
    if (row.regime == r) return row;
  throw Error(ErrorCode::InvalidInput, "regime " + r.label() + " not in table");
}

std::string RegimeTable::ordering() const {
  std::vector<const RegimeRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RegimeRow* a, const RegimeRow* b) { return a->mean < b->mean; });
  std::string out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i) out += sorted[i - 1]->mean == sorted[i]->mean ? " = " : " < ";
    out += sorted[i]->regime.label();
  }
  return out;
}

namespace {

std::vector<Pose2DSequence> channel(const RegimeCorpus& corpus, Input2D input,
                                    const std::optional<DetectorNoiseConfig>& noise,
                                    std::uint64_t seed, std::string_view split) {
  std::vector<Pose2DSequence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    if (input == Input2D::GT) {
      out.push_back(s.gt2d);
    } else if (noise) {
      DetectorNoiseConfig cfg = *noise;
      cfg.seed = derive_seed(seed, std::string(split) + "/" + s.id);
      out.push_back(synth_detect(s.gt2d, cfg, s.image_width));
    } else if (s.hpe2d) {
      out.push_back(*s.hpe2d);
    } else {
      throw Error(ErrorCode::MissingChannel,
                  "sequence " + s.id + " has no detected 2D channel for an HPE regime");
    }
  }
  return out;
}

}  // namespace

RegimeTable run_regimes(const RegimeCorpus& train, const RegimeCorpus& test, double lambda,
                        const std::vector<std::uint64_t>& seeds,
                        const std::optional<DetectorNoiseConfig>& noise) {
  if (train.empty() || test.empty())
    throw Error(ErrorCode::EmptyCorpus, "regime analysis needs train and test sequences");
  if (seeds.empty()) throw Error(ErrorCode::InvalidInput, "regime analysis needs seeds");
  RegimeTable table;
  table.lambda = lambda;
  table.seeds = seeds;
  for (const auto& r : all_regimes()) table.rows.push_back({r, {}, 0.0});

  std::vector<Pose3DSequence> train_targets, test_targets;
  for (const auto& s : train) train_targets.push_back(s.target);
  for (const auto& s : test) test_targets.push_back(s.target);

  for (auto seed : seeds) {
    const std::vector<Pose2DSequence> train_in[2] = {
        channel(train, Input2D::GT, noise, seed, "train"),
        channel(train, Input2D::HPE, noise, seed, "train")};
    const std::vector<Pose2DSequence> test_in[2] = {
        channel(test, Input2D::GT, noise, seed, "test"),
        channel(test, Input2D::HPE, noise, seed, "test")};
    for (auto& row : table.rows) {
      const auto model =
          fit(train_in[static_cast<int>(row.regime.train)], train_targets, lambda);
      const auto& inputs = test_in[static_cast<int>(row.regime.test)];
      std::vector<double> per_sequence;
      for (std::size_t i = 0; i < test.size(); ++i)
        per_sequence.push_back(mpjpe(test_targets[i], predict(model, inputs[i])));
      row.per_seed.push_back(per_sequence_average(per_sequence));
    }
  }
  for (auto& row : table.rows)
    row.mean = std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) /
               static_cast<double>(row.per_seed.size());
  return table;
}

nlohmann::json to_json(const RegimeTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"regime", r.regime.label()}, {"mean_mpjpe", r.mean}, {"per_seed", r.per_seed}});
  return {{"lambda", t.lambda}, {"seeds", t.seeds}, {"rows", rows}, {"ordering", t.ordering()}};
}

std::string format_table(const RegimeTable& t) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-12s %12s   %s\n", "Regime", "MPJPE (mm)", "per seed");
  out << line;
  for (const auto& r : t.rows) {
    std::snprintf(line, sizeof line, "%-12s %12.2f  ", r.regime.label().c_str(), r.mean);
    out << line;
    for (double v : r.per_seed) {
      std::snprintf(line, sizeof line, " %.2f", v);
      out << line;
    }
    out << '\n';
  }
  out << "ordering: " << t.ordering() << '\n';
  return out.str();
}

}  // namespace posefuse
