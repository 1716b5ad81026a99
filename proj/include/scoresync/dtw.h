#pragma once

#include <cstddef>
#include <vector>

#include "scoresync/features.h"
#include "scoresync/matrix.h"

namespace scoresync {

struct PathPoint {
  std::size_t perf = 0;
  std::size_t score = 0;
  /// True when this point was reached through a structural jump edge.
  bool jump = false;

  bool operator==(const PathPoint&) const = default;
};

struct AlignmentPath {
  std::vector<PathPoint> points;
  double total_cost = 0.0;
};

/// Classic accumulated cost D(i,j) = cost(i,j) + min(D(i-1,j-1), D(i,j-1), D(i-1,j)).
Matrix accumulated_cost(const CrossSimilarityMatrix& cost);

/// Optimal monotone path from (0,0) to (p-1,q-1). Backtracking prefers the
/// diagonal step, then the score-advance step, then the performance-advance step.
AlignmentPath dtw_align(const CrossSimilarityMatrix& cost);

/// Largest p+q accepted by the brute-force oracles.
inline constexpr std::size_t kBruteForceLimit = 16;

/// Exhaustive search over every monotone path. Test oracle; p+q <= 16.
AlignmentPath dtw_brute_force(const CrossSimilarityMatrix& cost);

/// For each performance frame, the first score frame paired with it.
std::vector<std::size_t> path_to_score_indices(const AlignmentPath& path, std::size_t perf_frames);

/// Throws InputError for an empty matrix or any non-finite cell.
void check_cost_matrix(const CrossSimilarityMatrix& cost);

}  // namespace scoresync
