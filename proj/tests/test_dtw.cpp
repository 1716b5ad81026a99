#include <catch_amalgamated.hpp>

#include "scoresync/dtw.h"
#include "scoresync/error.h"
#include "test_util.h"

using namespace scoresync;
using Catch::Matchers::ContainsSubstring;

namespace {

Matrix abs_cost(std::vector<double> a, std::vector<double> b) {
  Matrix m(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = std::abs(a[i] - b[j]);
  }
  return m;
}

bool legal_classic_path(const AlignmentPath& path, std::size_t p, std::size_t q) {
  if (path.points.empty() || path.points.front() != PathPoint{0, 0} || path.points.back() != PathPoint{p - 1, q - 1})
    return false;
  for (std::size_t k = 1; k < path.points.size(); ++k) {
    const auto di = path.points[k].perf - path.points[k - 1].perf;
    const auto dj = path.points[k].score - path.points[k - 1].score;
    if (path.points[k].perf < path.points[k - 1].perf || path.points[k].score < path.points[k - 1].score) return false;
    if (di > 1 || dj > 1 || di + dj == 0) return false;
  }
  return true;
}

double path_cost(const Matrix& cost, const AlignmentPath& path) {
  double acc = 0.0;
  for (const auto& pt : path.points) acc += cost(pt.perf, pt.score);
  return acc;
}

}  // namespace

TEST_CASE("identical sequences align on the diagonal at zero cost", "[dtw]") {
  std::mt19937_64 rng(1);
  const auto seq = test::random_features(6, rng);
  const auto path = dtw_align(cross_similarity(seq, seq));
  CHECK(path.total_cost == 0.0);
  REQUIRE(path.points.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(path.points[i] == PathPoint{i, i});
}

TEST_CASE("repeated score frame is absorbed by a score-advance step", "[dtw]") {
  const auto cost = abs_cost({0, 1, 2}, {0, 1, 1, 2});
  const auto path = dtw_align(cost);
  CHECK(path.total_cost == 0.0);
  const std::vector<PathPoint> expected = {{0, 0}, {1, 1}, {1, 2}, {2, 3}};
  CHECK(path.points == expected);
  CHECK(dtw_brute_force(cost).total_cost == 0.0);
  CHECK(path_to_score_indices(path, 3) == std::vector<std::size_t>{0, 1, 3});
}

TEST_CASE("single performance frame walks the whole row", "[dtw]") {
  Matrix cost(1, 4);
  cost(0, 0) = 0.5;
  cost(0, 1) = 1.0;
  cost(0, 2) = 0.25;
  cost(0, 3) = 2.0;
  const auto path = dtw_align(cost);
  CHECK(path.total_cost == 3.75);
  REQUIRE(path.points.size() == 4);
  CHECK(path_to_score_indices(path, 1) == std::vector<std::size_t>{0});
}

TEST_CASE("all-ones 3x3 costs three cells", "[dtw]") {
  const Matrix ones(3, 3, 1.0);
  CHECK(dtw_brute_force(ones).total_cost == 3.0);
  const auto path = dtw_align(ones);
  CHECK(path.total_cost == 3.0);
  CHECK(path_to_score_indices(path, 3) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("accumulated cost recurrence", "[dtw]") {
  Matrix cost(2, 2);
  cost(0, 0) = 1;
  cost(0, 1) = 2;
  cost(1, 0) = 3;
  cost(1, 1) = 4;
  const auto d = accumulated_cost(cost);
  CHECK(d(0, 0) == 1);
  CHECK(d(0, 1) == 3);
  CHECK(d(1, 0) == 4);
  CHECK(d(1, 1) == 5);
}

TEST_CASE("tie-break prefers diagonal then score-advance", "[dtw]") {
  const Matrix zeros(3, 3, 0.0);
  const auto path = dtw_align(zeros);
  const std::vector<PathPoint> diagonal = {{0, 0}, {1, 1}, {2, 2}};
  CHECK(path.points == diagonal);

  // From (1,2) every predecessor ties at 0, so the diagonal to (0,1) is taken.
  Matrix wide(2, 3, 0.0);
  const auto wpath = dtw_align(wide);
  const std::vector<PathPoint> expected = {{0, 0}, {0, 1}, {1, 2}};
  CHECK(wpath.points == expected);
}

TEST_CASE("DTW matches the brute-force oracle", "[dtw][property]") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t p = dim(rng);
    const std::size_t q = dim(rng);
    if (p + q > kBruteForceLimit) continue;
    const auto cost = test::random_matrix(p, q, rng);
    const auto fast = dtw_align(cost);
    const auto slow = dtw_brute_force(cost);
    INFO("p=" << p << " q=" << q);
    REQUIRE(fast.total_cost == slow.total_cost);
    REQUIRE(legal_classic_path(fast, p, q));
    REQUIRE(legal_classic_path(slow, p, q));
    REQUIRE(path_cost(cost, fast) == fast.total_cost);
    REQUIRE(fast.points.size() <= p + q - 1);
    REQUIRE(fast.points.size() >= std::max(p, q));
    ++checked;
  }
  CHECK(checked > 200);
}

TEST_CASE("2x2 instances agree with the oracle", "[dtw]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cost = test::random_matrix(2, 2, rng);
    REQUIRE(dtw_align(cost).total_cost == dtw_brute_force(cost).total_cost);
  }
}

TEST_CASE("scaling the cost scales the total and keeps the path", "[dtw][property]") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cost = test::random_matrix(7, 9, rng);
    // Powers of two keep every partial sum exact, so ties are preserved.
    for (double lambda : {0.5, 2.0, 8.0}) {
      Matrix scaled = cost;
      for (double& v : scaled.data()) v *= lambda;
      const auto a = dtw_align(cost);
      const auto b = dtw_align(scaled);
      REQUIRE(b.total_cost == lambda * a.total_cost);
      REQUIRE(a.points == b.points);
    }
    const auto a = dtw_align(cost);
    Matrix scaled = cost;
    for (double& v : scaled.data()) v *= 3.7;
    CHECK_THAT(dtw_align(scaled).total_cost, Catch::Matchers::WithinRel(3.7 * a.total_cost, 1e-12));
  }
}

TEST_CASE("accumulated cost is non-decreasing along the chosen path", "[dtw][property]") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cost = test::random_matrix(10, 6, rng);
    const auto d = accumulated_cost(cost);
    const auto path = dtw_align(cost);
    CHECK(path.total_cost == d(9, 5));
    for (std::size_t k = 1; k < path.points.size(); ++k) {
      const auto& a = path.points[k - 1];
      const auto& b = path.points[k];
      REQUIRE(d(a.perf, a.score) <= d(b.perf, b.score));
    }
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t j = 0; j < 6; ++j) REQUIRE(d(i, j) >= cost(i, j));
    }
  }
}

TEST_CASE("path_to_score_indices", "[dtw]") {
  AlignmentPath diag;
  diag.points = {{0, 0}, {1, 1}, {2, 2}};
  CHECK(path_to_score_indices(diag, 3) == std::vector<std::size_t>{0, 1, 2});

  AlignmentPath gap;
  gap.points = {{0, 0}, {2, 1}};
  CHECK_THROWS_WITH(path_to_score_indices(gap, 3), ContainsSubstring("performance frame 1"));
}

TEST_CASE("DTW input validation", "[dtw]") {
  CHECK_THROWS_WITH(dtw_align(Matrix{}), ContainsSubstring("empty"));
  Matrix bad(2, 2, 1.0);
  bad(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH(dtw_align(bad), ContainsSubstring("non-finite"));
  bad(1, 0) = std::nan("");
  CHECK_THROWS_AS(dtw_align(bad), InputError);
  CHECK_THROWS_WITH(dtw_brute_force(Matrix(9, 8, 0.0)), ContainsSubstring("enumeration bound"));
}
