#include "posefuse/metrics.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "posefuse/error.hpp"
#include "posefuse/quality.hpp"

namespace posefuse {

namespace {

void check_shapes(const Pose3DSequence& gt, const Pose3DSequence& pred) {
  if (gt.frames() != pred.frames() || gt.joints() != pred.joints())
    throw Error(ErrorCode::ShapeMismatch,
                "gt is " + std::to_string(gt.frames()) + "x" + std::to_string(gt.joints()) +
                    ", pred is " + std::to_string(pred.frames()) + "x" +
                    std::to_string(pred.joints()));
}

std::vector<Eigen::Vector3d> frame_points(const Pose3DSequence& pose, std::size_t t,
                                          bool root_relative) {
  const auto f = pose.frame(t);
  std::vector<Eigen::Vector3d> pts(f.begin(), f.end());
  if (root_relative) {
    const Eigen::Vector3d root = pts[pose.schema().root_index];
    for (auto& p : pts) p -= root;
  }
  return pts;
}

double mean_distance(std::span<const Eigen::Vector3d> a, std::span<const Eigen::Vector3d> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += (a[j] - b[j]).norm();
  return sum / static_cast<double>(a.size());
}

template <typename FrameError>
double frame_mean(const Pose3DSequence& gt, FrameError&& frame_error) {
  double sum = 0.0;
  for (std::size_t t = 0; t < gt.frames(); ++t) sum += frame_error(t);
  return sum / static_cast<double>(gt.frames());
}

}  // namespace

Similarity procrustes(std::span<const Eigen::Vector3d> source,
                      std::span<const Eigen::Vector3d> target, bool with_scale,
                      bool* degenerate) {
  if (source.size() != target.size() || source.empty())
    throw Error(ErrorCode::ShapeMismatch, "procrustes needs two equally sized point sets");
  const double n = static_cast<double>(source.size());
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_t = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    mu_s += source[i];
    mu_t += target[i];
  }
  mu_s /= n;
  mu_t /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Eigen::Vector3d ds = source[i] - mu_s;
    cov += (target[i] - mu_t) * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cov /= n;
  var_s /= n;

  Similarity sim;
  const bool flat = !(var_s > 1e-12);
  if (degenerate) *degenerate = flat;
  if (!flat) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d d = Eigen::Vector3d::Ones();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d(2) = -1.0;
    sim.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    if (with_scale) sim.scale = svd.singularValues().dot(d) / var_s;
  }
  sim.translation = mu_t - sim.scale * (sim.rotation * mu_s);
  return sim;
}

double mpjpe(const Pose3DSequence& gt, const Pose3DSequence& pred, const MetricOptions& opts) {
  check_shapes(gt, pred);
  return frame_mean(gt, [&](std::size_t t) {
    return mean_distance(frame_points(gt, t, opts.root_relative),
                         frame_points(pred, t, opts.root_relative));
  });
}

double p_mpjpe(const Pose3DSequence& gt, const Pose3DSequence& pred, const MetricOptions& opts,
               std::vector<std::size_t>* flagged) {
  check_shapes(gt, pred);
  return frame_mean(gt, [&](std::size_t t) {
    const auto g = frame_points(gt, t, opts.root_relative);
    auto p = frame_points(pred, t, opts.root_relative);
    bool degenerate = false;
    const Similarity sim = procrustes(p, g, opts.procrustes_scale, &degenerate);
    if (degenerate && flagged) flagged->push_back(t);
    for (auto& x : p) x = sim.apply(x);
    return mean_distance(g, p);
  });
}

double n_mpjpe(const Pose3DSequence& gt, const Pose3DSequence& pred, const MetricOptions& opts,
               std::vector<std::size_t>* flagged) {
  check_shapes(gt, pred);
  return frame_mean(gt, [&](std::size_t t) {
    const auto g = frame_points(gt, t, opts.root_relative);
    auto p = frame_points(pred, t, opts.root_relative);
    double pg = 0.0, pp = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      pg += p[j].dot(g[j]);
      pp += p[j].squaredNorm();
    }
    double scale = 1.0;
    if (pp > 0.0)
      scale = pg / pp;
    else if (flagged)
      flagged->push_back(t);
    for (auto& x : p) x *= scale;
    return mean_distance(g, p);
  });
}

double velocity_error(const Pose3DSequence& gt, const Pose3DSequence& pred,
                      const MetricOptions& opts) {
  check_shapes(gt, pred);
  if (gt.frames() < 2)
    throw Error(ErrorCode::InvalidInput, "velocity error needs at least two frames");
  double sum = 0.0;
  auto g_prev = frame_points(gt, 0, opts.root_relative);
  auto p_prev = frame_points(pred, 0, opts.root_relative);
  for (std::size_t t = 1; t < gt.frames(); ++t) {
    auto g = frame_points(gt, t, opts.root_relative);
    auto p = frame_points(pred, t, opts.root_relative);
    double frame_sum = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j)
      frame_sum += ((g[j] - g_prev[j]) - (p[j] - p_prev[j])).norm();
    sum += frame_sum / static_cast<double>(g.size());
    g_prev = std::move(g);
    p_prev = std::move(p);
  }
  return sum / static_cast<double>(gt.frames() - 1);
}

double pos2d_error(const Pose2DSequence& gt2d, const Pose2DSequence& pred2d,
                   const CameraModel& cam) {
  return score_sample(pred2d, gt2d, cam).score;
}

double per_sequence_average(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidInput, "no sequences to average");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

MetricReport evaluate(std::span<const Pose3DSequence> gt, std::span<const Pose3DSequence> pred,
                      const MetricOptions& opts, std::span<const std::string> ids) {
  if (gt.size() != pred.size())
    throw Error(ErrorCode::ShapeMismatch, "gt and pred sequence counts differ");
  if (gt.empty()) throw Error(ErrorCode::InvalidInput, "no sequences to evaluate");
  MetricReport report;
  std::vector<double> m, p, n, v;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    SequenceMetrics s;
    s.id = i < ids.size() ? ids[i] : "seq" + std::to_string(i);
    s.mpjpe = mpjpe(gt[i], pred[i], opts);
    s.p_mpjpe = p_mpjpe(gt[i], pred[i], opts);
    s.n_mpjpe = n_mpjpe(gt[i], pred[i], opts);
    if (gt[i].frames() >= 2) {
      s.velocity_error = velocity_error(gt[i], pred[i], opts);
      v.push_back(*s.velocity_error);
    }
    m.push_back(s.mpjpe);
    p.push_back(s.p_mpjpe);
    n.push_back(s.n_mpjpe);
    report.per_sequence.push_back(std::move(s));
  }
  report.mpjpe = per_sequence_average(m);
  report.p_mpjpe = per_sequence_average(p);
  report.n_mpjpe = per_sequence_average(n);
  if (!v.empty()) report.velocity_error = per_sequence_average(v);
  return report;
}

nlohmann::json to_json(const MetricReport& r) {
  auto opt = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(); };
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& s : r.per_sequence)
    seqs.push_back({{"id", s.id},
                    {"mpjpe", s.mpjpe},
                    {"p_mpjpe", s.p_mpjpe},
                    {"n_mpjpe", s.n_mpjpe},
                    {"velocity_error", opt(s.velocity_error)}});
  return {{"mpjpe", r.mpjpe},
          {"p_mpjpe", r.p_mpjpe},
          {"n_mpjpe", r.n_mpjpe},
          {"velocity_error", opt(r.velocity_error)},
          {"per_sequence", seqs}};
}

std::string format_table(const MetricReport& r) {
  std::ostringstream out;
  char line[256];
  auto row = [&](const std::string& name, double a, double b, double c,
                 const std::optional<double>& v) {
    if (v)
      std::snprintf(line, sizeof line, "%-24s %10.2f %10.2f %10.2f %10.2f\n", name.c_str(), a, b,
                    c, *v);
    else
      std::snprintf(line, sizeof line, "%-24s %10.2f %10.2f %10.2f %10s\n", name.c_str(), a, b,
                    c, "-");
    out << line;
  };
  std::snprintf(line, sizeof line, "%-24s %10s %10s %10s %10s\n", "Sequence", "MPJPE", "P-MPJPE",
                "N-MPJPE", "Vel. Err.");
  out << line;
  for (const auto& s : r.per_sequence)
    row(s.id, s.mpjpe, s.p_mpjpe, s.n_mpjpe, s.velocity_error);
  row("Average", r.mpjpe, r.p_mpjpe, r.n_mpjpe, r.velocity_error);
  return out.str();
}

}  // namespace posefuse
