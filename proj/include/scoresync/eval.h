#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scoresync/dtw.h"
#include "scoresync/ground_truth.h"
#include "scoresync/structure.h"

namespace scoresync {

inline constexpr std::array<double, 4> kThresholdsMs = {25.0, 50.0, 100.0, 200.0};

struct AccuracyReport {
  std::array<double, 4> accuracy_pct{};  // one entry per kThresholdsMs
  std::size_t n_events = 0;
};

/// A path expressed in seconds: (perf_time, score_time) per point, perf
/// times non-decreasing.
struct TimedPath {
  std::vector<double> perf_time_s;
  std::vector<double> score_time_s;

  static TimedPath from_frames(const AlignmentPath& path, double perf_hop, double score_hop);
};

/// Signed errors e_i = estimated - reference score time for each annotated
/// event. The estimate interpolates linearly between the first path point of
/// each distinct performance time.
std::vector<double> alignment_errors(const TimedPath& predicted, const GroundTruthMap& gt);
std::vector<double> alignment_errors(const AlignmentPath& predicted, double perf_hop, double score_hop,
                                     const GroundTruthMap& gt);

/// Percentage of |e_i| strictly below each threshold.
AccuracyReport accuracy_at_margins(std::span<const double> errors_s);

/// Average of per-piece tables, or one table over the pooled events.
AccuracyReport aggregate_reports(std::span<const AccuracyReport> pieces, bool pooled);

/// Greedy in-order one-to-one matching; a predicted point matches the first
/// unmatched reference point within tol_frames on both axes.
double inflection_accuracy(const InflectionPointSet& pred, const InflectionPointSet& gt, std::size_t tol_frames);

inline constexpr std::size_t kDefaultInflectionTolerance = 5;

/// Share of reference (perf, score) frame pairs whose performance frame is
/// mapped by the path (first pairing, carried over skipped frames) to within
/// tol_frames of the reference score frame.
double frame_pair_recovery(const AlignmentPath& path, std::span<const std::size_t> reference_score_frames,
                           std::size_t tol_frames);

struct DieboldMarianoResult {
  double statistic = 0.0;
  std::optional<double> p_value;  // empty when the loss differential is constant
  bool degenerate = false;
};

/// Paired test on squared-error differentials with the small-sample
/// correction at horizon 1; two-sided p from Student t with n-1 dof.
DieboldMarianoResult diebold_mariano(std::span<const double> errors_a, std::span<const double> errors_b);

}  // namespace scoresync
