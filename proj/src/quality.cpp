#include "posefuse/quality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "posefuse/error.hpp"

namespace posefuse {

nlohmann::json to_json(const QualityReport& r) {
  return {{"sample_id", r.sample_id},
          {"score", r.score},
          {"per_frame_scores", r.per_frame_scores},
          {"kept", r.kept}};
}

QualityReport quality_report_from_json(const nlohmann::json& j) {
  QualityReport r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.score = j.at("score").get<double>();
  r.per_frame_scores = j.value("per_frame_scores", std::vector<double>{});
  r.kept = j.value("kept", false);
  return r;
}

QualityReport score_sample(const Pose2DSequence& detected, const Pose2DSequence& truth,
                           const CameraModel& cam, std::string sample_id) {
  if (!same_schema(detected.schema(), truth.schema()))
    throw Error(ErrorCode::SchemaMismatch, "detected schema " + detected.schema().name +
                                               " differs from truth schema " + truth.schema().name);
  if (detected.frames() != truth.frames())
    throw Error(ErrorCode::ShapeMismatch, "detected has " + std::to_string(detected.frames()) +
                                              " frames, truth has " +
                                              std::to_string(truth.frames()));
  const double s = normalization_scale(cam);
  QualityReport report;
  report.sample_id = std::move(sample_id);
  report.per_frame_scores.reserve(truth.frames());
  for (std::size_t t = 0; t < truth.frames(); ++t) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < truth.joints(); ++j) {
      if (truth.confidence(t, j) <= 0.0) continue;
      sum += (s * detected(t, j) - s * truth(t, j)).norm();
      ++n;
    }
    if (n == 0)
      throw Error(ErrorCode::InvalidInput,
                  "frame " + std::to_string(t) + " has no scorable joints");
    report.per_frame_scores.push_back(sum / static_cast<double>(n));
  }
  report.score = std::accumulate(report.per_frame_scores.begin(), report.per_frame_scores.end(),
                                 0.0) /
                 static_cast<double>(report.per_frame_scores.size());
  return report;
}

std::vector<std::string> filter_top(std::vector<QualityReport>& reports, double fraction) {
  if (reports.empty()) throw Error(ErrorCode::EmptyCorpus, "no quality reports to filter");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error(ErrorCode::InvalidInput, "filter fraction must lie in (0, 1]");
  std::vector<std::size_t> order(reports.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (reports[a].score != reports[b].score) return reports[a].score < reports[b].score;
    return reports[a].sample_id < reports[b].sample_id;
  });
  // The epsilon absorbs products such as 0.1 * 30 = 3.0000000000000004.
  const auto keep = std::min<std::size_t>(
      reports.size(),
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::ceil(fraction * static_cast<double>(reports.size()) - 1e-9))));
  std::vector<std::string> kept;
  for (auto& r : reports) r.kept = false;
  for (std::size_t i = 0; i < keep; ++i) {
    reports[order[i]].kept = true;
    kept.push_back(reports[order[i]].sample_id);
  }
  return kept;
}

ScoreSummary summarize(std::vector<double> scores) {
  ScoreSummary s;
  s.count = scores.size();
  if (scores.empty()) return s;
  std::sort(scores.begin(), scores.end());
  s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(scores.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, scores.size() - 1);
    return scores[lo] + (pos - static_cast<double>(lo)) * (scores[hi] - scores[lo]);
  };
  s.median = quantile(0.5);
  s.p90 = quantile(0.9);
  s.p99 = quantile(0.99);
  return s;
}

nlohmann::json to_json(const ScoreSummary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"p90", s.p90},
          {"p99", s.p99}};
}

}  // namespace posefuse
