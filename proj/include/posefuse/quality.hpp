#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "posefuse/geometry.hpp"
#include "posefuse/skeleton.hpp"

namespace posefuse {

struct QualityReport {
  std::string sample_id;
  double score = 0.0;  // normalized px
  std::vector<double> per_frame_scores;
  bool kept = false;
};

nlohmann::json to_json(const QualityReport& report);
QualityReport quality_report_from_json(const nlohmann::json& j);

/// Mean 2D distance in the 2000-px-normalized plane over frames and the
/// joints whose truth confidence is non-zero.
QualityReport score_sample(const Pose2DSequence& detected, const Pose2DSequence& truth,
                           const CameraModel& cam, std::string sample_id = {});

/// Keeps the ceil(fraction * n) lowest scores, ties broken by sample id, and
/// sets the kept flags. Returned ids are in score order.
std::vector<std::string> filter_top(std::vector<QualityReport>& reports, double fraction = 0.10);

struct ScoreSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
};

// Quantiles use linear interpolation between order statistics.
ScoreSummary summarize(std::vector<double> scores);
nlohmann::json to_json(const ScoreSummary& s);

}  // namespace posefuse
