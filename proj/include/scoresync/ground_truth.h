#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scoresync {

struct GroundTruthEvent {
  double perf_time_s = 0.0;
  double score_time_s = 0.0;
};

/// Reference annotations; performance times strictly increasing.
struct GroundTruthMap {
  std::vector<GroundTruthEvent> events;

  void validate() const;

  /// Score time at `perf_time_s`, linearly interpolated between events and
  /// clamped to the first/last event outside their span.
  double score_time_at(double perf_time_s) const;

  /// One event per frame: (i*perf_hop, i*score_hop) for i < frames.
  static GroundTruthMap identity(std::size_t frames, double perf_hop, double score_hop);
};

/// CSV with header `perf_time_s,score_time_s`; '#' lines are comments.
GroundTruthMap parse_ground_truth_csv(std::string_view text);
GroundTruthMap load_ground_truth_csv(const std::filesystem::path& path);
std::string format_ground_truth_csv(const GroundTruthMap& gt, std::string_view comment = {});
void save_ground_truth_csv(const GroundTruthMap& gt, const std::filesystem::path& path,
                           std::string_view comment = {});

}  // namespace scoresync
