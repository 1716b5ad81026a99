#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "scoresync/dtw.h"
#include "scoresync/features.h"
#include "scoresync/ground_truth.h"

namespace scoresync {

struct InflectionPoint {
  std::size_t perf = 0;
  std::size_t score = 0;

  bool operator==(const InflectionPoint&) const = default;
};

/// Structural jump markers in chronological order. Entries alternate
/// subpath-end (0, 2, 4, ...) and subpath-start (1, 3, 5, ...), so the pair
/// (points[2k], points[2k+1]) describes one jump.
struct InflectionPointSet {
  std::vector<InflectionPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Throws InputError on odd count, out-of-bounds coordinates, or
  /// performance coordinates that are not strictly increasing.
  void validate(std::size_t perf_frames, std::size_t score_frames) const;
};

/// JSON form: {"points": [[a, b], ...]}.
InflectionPointSet parse_inflections_json(std::string_view text);
std::string format_inflections_json(const InflectionPointSet& set);

/// Half-width of the landing rectangle around each subpath-start point.
inline constexpr std::size_t kJumpHalfWidth = 5;

/// DTW with extra jump predecessors. For each pair k, every cell (m, n) in
/// the rectangle [start - 5, start + 5] (clipped to bounds) with
/// m > end.perf may take D(end) as predecessor; the jump edge itself is free.
/// Points reached through a jump carry `jump = true`.
AlignmentPath jump_dtw_align(const CrossSimilarityMatrix& cost, const InflectionPointSet& infl);

inline constexpr std::size_t kJumpBruteForceLimit = 14;

/// Exhaustive oracle for jump_dtw_align; p+q <= 14 and at most one pair.
AlignmentPath jump_dtw_brute_force(const CrossSimilarityMatrix& cost, const InflectionPointSet& infl);

enum class SpliceKind { backward_jump, forward_jump };

std::string_view to_string(SpliceKind kind);

/// One join in source-frame coordinates: playback of the source stops just
/// before `split_frame` and resumes at `resume_frame`.
struct SpliceOp {
  SpliceKind kind = SpliceKind::backward_jump;
  std::size_t split_frame = 0;
  std::size_t resume_frame = 0;

  bool operator==(const SpliceOp&) const = default;
};

/// Source frame played at each output frame, for splices in playback order.
std::vector<std::size_t> splice_frame_map(const std::vector<SpliceOp>& splices, std::size_t source_frames);

/// Re-index annotations through the splices. Events inside a repeated span
/// appear twice; events inside a skipped span are dropped.
GroundTruthMap extrapolate_ground_truth(const GroundTruthMap& gt, const std::vector<SpliceOp>& splices,
                                        double hop_seconds);

struct PerturbOptions {
  std::size_t min_segment = 10;
  /// Hop of the score the ground truth refers to; <= 0 means "same as input".
  double score_hop_seconds = 0.0;
};

struct Perturbation {
  FeatureSequence features;
  GroundTruthMap ground_truth;
  InflectionPointSet inflections;
  std::vector<SpliceOp> splices;
  /// Source frame for each output frame.
  std::vector<std::size_t> frame_map;
  /// Ground-truth score frame for each output frame.
  std::vector<std::size_t> score_frames;
};

inline constexpr int kMaxJumps = 4;

/// Random split-join of a feature sequence with n_jumps in [1, 4] jumps,
/// deterministic in `seed`. Segments between joins are at least
/// `min_segment` frames and every jump spans at least that many frames.
Perturbation synth_perturb(const FeatureSequence& seq, const GroundTruthMap& gt, int n_jumps,
                           std::uint64_t seed, const PerturbOptions& options = {});

/// Apply an explicit splice plan: spliced features, extrapolated ground
/// truth, and one inflection pair per discontinuity of the frame map.
Perturbation apply_splices(const FeatureSequence& seq, const GroundTruthMap& gt, std::vector<SpliceOp> plan,
                           const PerturbOptions& options = {});

/// Splice log JSON for reproducibility.
std::string format_splice_log_json(const Perturbation& p, std::uint64_t seed);

}  // namespace scoresync
