#include "scoresync/dtw.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scoresync/error.h"

namespace scoresync {

void check_cost_matrix(const CrossSimilarityMatrix& cost) {
  SCORESYNC_REQUIRE(cost.rows() >= 1 && cost.cols() >= 1, "cost matrix is empty");
  for (std::size_t i = 0; i < cost.rows(); ++i) {
    for (std::size_t j = 0; j < cost.cols(); ++j) {
      SCORESYNC_REQUIRE(std::isfinite(cost(i, j)),
                        "non-finite cost cell at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    }
  }
}

Matrix accumulated_cost(const CrossSimilarityMatrix& cost) {
  check_cost_matrix(cost);
  const std::size_t p = cost.rows();
  const std::size_t q = cost.cols();
  Matrix d(p, q);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else if (i == 0) {
        best = d(0, j - 1);
      } else if (j == 0) {
        best = d(i - 1, 0);
      } else {
        best = std::min({d(i - 1, j - 1), d(i, j - 1), d(i - 1, j)});
      }
      d(i, j) = (i == 0 && j == 0) ? cost(0, 0) : cost(i, j) + best;
    }
  }
  return d;
}

AlignmentPath dtw_align(const CrossSimilarityMatrix& cost) {
  const Matrix d = accumulated_cost(cost);
  AlignmentPath path;
  std::size_t i = d.rows() - 1;
  std::size_t j = d.cols() - 1;
  path.total_cost = d(i, j);
  path.points.push_back({i, j});
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = d(i - 1, j - 1);
      const double score_adv = d(i, j - 1);
      const double perf_adv = d(i - 1, j);
      if (diag <= score_adv && diag <= perf_adv) {
        --i;
        --j;
      } else if (score_adv <= perf_adv) {
        --j;
      } else {
        --i;
      }
    }
    path.points.push_back({i, j});
  }
  std::reverse(path.points.begin(), path.points.end());
  return path;
}

namespace {

struct BruteForceSearch {
  const CrossSimilarityMatrix& cost;
  std::vector<PathPoint> current;
  std::vector<PathPoint> best;
  double best_cost = std::numeric_limits<double>::infinity();

  // Costs are summed in path order so the result is bit-identical to the
  // left-to-right fold performed by the recurrence.
  void visit(std::size_t i, std::size_t j, double acc) {
    current.push_back({i, j});
    if (i + 1 == cost.rows() && j + 1 == cost.cols()) {
      if (acc < best_cost) {
        best_cost = acc;
        best = current;
      }
    } else {
      if (i + 1 < cost.rows() && j + 1 < cost.cols()) visit(i + 1, j + 1, acc + cost(i + 1, j + 1));
      if (j + 1 < cost.cols()) visit(i, j + 1, acc + cost(i, j + 1));
      if (i + 1 < cost.rows()) visit(i + 1, j, acc + cost(i + 1, j));
    }
    current.pop_back();
  }
};

}  // namespace

AlignmentPath dtw_brute_force(const CrossSimilarityMatrix& cost) {
  check_cost_matrix(cost);
  SCORESYNC_REQUIRE(cost.rows() + cost.cols() <= kBruteForceLimit,
                    "instance above enumeration bound: p+q = " +
                        std::to_string(cost.rows() + cost.cols()) + " > " +
                        std::to_string(kBruteForceLimit));
  BruteForceSearch search{cost, {}, {}};
  search.visit(0, 0, cost(0, 0));
  return {std::move(search.best), search.best_cost};
}

std::vector<std::size_t> path_to_score_indices(const AlignmentPath& path, std::size_t perf_frames) {
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> out(perf_frames, unset);
  for (const auto& pt : path.points) {
    SCORESYNC_REQUIRE(pt.perf < perf_frames, "path point beyond performance length");
    if (out[pt.perf] == unset) out[pt.perf] = pt.score;
  }
  for (std::size_t i = 0; i < perf_frames; ++i) {
    SCORESYNC_REQUIRE(out[i] != unset,
                      "path does not cover performance frame " + std::to_string(i));
  }
  return out;
}

}  // namespace scoresync
