#include <catch_amalgamated.hpp>

#include "scoresync/error.h"
#include "scoresync/eval.h"
#include "scoresync/structure.h"
#include "test_util.h"

using namespace scoresync;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

FeatureSequence one_hot(const std::vector<std::size_t>& classes, std::size_t bins) {
  FeatureSequence seq;
  seq.data = Matrix(classes.size(), bins);
  seq.hop_seconds = 0.1;
  for (std::size_t i = 0; i < classes.size(); ++i) seq.data(i, classes[i]) = 1.0;
  return seq;
}

InflectionPointSet pair_of(std::size_t a0, std::size_t b0, std::size_t a1, std::size_t b1) {
  InflectionPointSet set;
  set.points = {{a0, b0}, {a1, b1}};
  return set;
}

bool monotone_in_perf(const AlignmentPath& path) {
  for (std::size_t k = 1; k < path.points.size(); ++k) {
    if (path.points[k].perf < path.points[k - 1].perf) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("inflection set validation", "[structure]") {
  InflectionPointSet odd;
  odd.points = {{1, 1}};
  CHECK_THROWS_WITH(odd.validate(10, 10), ContainsSubstring("even"));
  CHECK_THROWS_WITH(pair_of(1, 1, 12, 3).validate(10, 10), ContainsSubstring("outside"));
  CHECK_THROWS_WITH(pair_of(5, 1, 5, 3).validate(10, 10), ContainsSubstring("strictly increasing"));
  CHECK_NOTHROW(pair_of(4, 8, 5, 2).validate(10, 10));
  CHECK_THROWS_AS(jump_dtw_align(Matrix(4, 4, 0.0), odd), InputError);
}

TEST_CASE("inflection JSON round trip", "[structure]") {
  const auto set = pair_of(99, 99, 100, 50);
  const auto text = format_inflections_json(set);
  CHECK(text == R"({"points":[[99,99],[100,50]]})");
  CHECK(parse_inflections_json(text).points == set.points);
  CHECK_THROWS_AS(parse_inflections_json("{\"points\": [[1]]}"), InputError);
  CHECK_THROWS_AS(parse_inflections_json("{\"pts\": []}"), InputError);
  CHECK_THROWS_AS(parse_inflections_json("{"), InputError);
  CHECK_THROWS_AS(parse_inflections_json("{\"points\": [[-1, 2]]}"), InputError);
}

TEST_CASE("jump DTW with no inflections is classic DTW", "[structure][property]") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cost = test::random_matrix(1 + trial % 9, 1 + (trial * 7) % 11, rng);
    const auto classic = dtw_align(cost);
    const auto jump = jump_dtw_align(cost, {});
    REQUIRE(jump.total_cost == classic.total_cost);
    REQUIRE(jump.points == classic.points);
  }
}

TEST_CASE("repeated section is followed through the jump edge", "[structure]") {
  // Score S1 S2 S3 = frames 0-1, 2-3, 4-5; the performance plays S1 S2 S2 S3.
  const auto score = one_hot({0, 1, 2, 3, 4, 5}, 6);
  const auto perf = one_hot({0, 1, 2, 3, 2, 3, 4, 5}, 6);
  const auto cost = cross_similarity(perf, score);
  const auto infl = pair_of(3, 3, 4, 2);

  const auto path = jump_dtw_align(cost, infl);
  CHECK(path.total_cost == 0.0);
  const std::vector<PathPoint> expected = {{0, 0}, {1, 1}, {2, 2}, {3, 3},
                                           {4, 2, true}, {5, 3}, {6, 4}, {7, 5}};
  CHECK(path.points == expected);
  CHECK(jump_dtw_brute_force(cost, infl).total_cost == 0.0);
  CHECK(dtw_align(cost).total_cost > 0.0);
}

TEST_CASE("a jump that saves nothing is never taken", "[structure]") {
  std::mt19937_64 rng(8);
  const auto seq = test::random_features(7, rng);
  const auto cost = cross_similarity(seq, seq);
  const auto infl = pair_of(2, 2, 3, 0);
  const auto path = jump_dtw_align(cost, infl);
  CHECK(path.points == dtw_align(cost).points);
  CHECK(path.total_cost == 0.0);
  for (const auto& pt : path.points) CHECK_FALSE(pt.jump);
  CHECK(jump_dtw_brute_force(cost, infl).total_cost == 0.0);
}

TEST_CASE("4x6 beneficial backward jump beats classic DTW", "[structure]") {
  // Zero-cost route: (0,0) (1,1), jump back to (2,0), then (3,1) .. (3,5).
  Matrix cost(4, 6, 1.0);
  for (auto [i, j] : {std::pair{0, 0}, {1, 1}, {2, 0}, {3, 1}, {3, 2}, {3, 3}, {3, 4}, {3, 5}}) cost(i, j) = 0.0;
  const auto infl = pair_of(1, 1, 2, 0);
  const double classic = dtw_brute_force(cost).total_cost;
  const double jump = jump_dtw_brute_force(cost, infl).total_cost;
  CHECK(classic == 1.0);
  CHECK(jump == 0.0);
  CHECK(jump < classic);
  const auto path = jump_dtw_align(cost, infl);
  CHECK(path.total_cost == jump);
  REQUIRE(path.points.size() == 8);
  CHECK(path.points[2] == PathPoint{2, 0, true});
}

TEST_CASE("landing rectangle is clipped at the border", "[structure]") {
  Matrix cost(4, 5, 1.0);
  // Source at the top-left, landing centre at the top-right corner.
  const auto infl = pair_of(0, 0, 1, 4);
  cost(1, 4) = 0.0;
  cost(2, 4) = 0.0;
  cost(3, 4) = 0.0;
  const auto path = jump_dtw_align(cost, infl);
  const auto oracle = jump_dtw_brute_force(cost, infl);
  CHECK(path.total_cost == oracle.total_cost);
  CHECK(path.total_cost == 1.0);
  for (const auto& pt : oracle.points) {
    CHECK(pt.perf < 4);
    CHECK(pt.score < 5);
  }
}

TEST_CASE("jump DTW agrees with its brute-force oracle", "[structure][property]") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> dim(2, 8);
  int checked = 0;
  while (checked < 150) {
    const std::size_t p = dim(rng);
    const std::size_t q = dim(rng);
    if (p + q > kJumpBruteForceLimit) continue;
    const auto cost = test::random_matrix(p, q, rng);
    std::uniform_int_distribution<std::size_t> row(0, p - 1), col(0, q - 1);
    std::size_t a0 = row(rng), a1 = row(rng);
    if (a0 == a1) continue;
    if (a0 > a1) std::swap(a0, a1);
    const auto infl = pair_of(a0, col(rng), a1, col(rng));
    const auto fast = jump_dtw_align(cost, infl);
    const auto slow = jump_dtw_brute_force(cost, infl);
    INFO("p=" << p << " q=" << q << " infl=" << format_inflections_json(infl));
    REQUIRE(fast.total_cost == slow.total_cost);
    REQUIRE(fast.total_cost <= dtw_align(cost).total_cost);
    REQUIRE(monotone_in_perf(fast));
    REQUIRE(fast.points.front() == PathPoint{0, 0});
    REQUIRE(fast.points.back().perf == p - 1);
    REQUIRE(fast.points.back().score == q - 1);
    double acc = 0.0;
    for (const auto& pt : fast.points) acc += cost(pt.perf, pt.score);
    REQUIRE(acc == fast.total_cost);
    int jumps = 0;
    for (const auto& pt : fast.points) jumps += pt.jump ? 1 : 0;
    REQUIRE(jumps <= 1);
    ++checked;
  }
}

TEST_CASE("brute-force bounds", "[structure]") {
  CHECK_THROWS_WITH(jump_dtw_brute_force(Matrix(8, 7, 0.0), {}), ContainsSubstring("enumeration bound"));
  InflectionPointSet two;
  two.points = {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  CHECK_THROWS_WITH(jump_dtw_brute_force(Matrix(5, 5, 0.0), two), ContainsSubstring("at most one"));
}

TEST_CASE("backward splice repeating [50,100)", "[structure][splice]") {
  std::mt19937_64 rng(4);
  const auto seq = test::random_features(150, rng);
  const auto gt = GroundTruthMap::identity(150, seq.hop_seconds, seq.hop_seconds);
  const auto out = apply_splices(seq, gt, {{SpliceKind::backward_jump, 100, 50}});
  CHECK(out.features.frames() == 200);
  const std::vector<InflectionPoint> expected = {{99, 99}, {100, 50}};
  CHECK(out.inflections.points == expected);
  for (std::size_t t = 0; t < out.frame_map.size(); ++t) {
    REQUIRE(out.score_frames[t] == out.frame_map[t]);
  }
}

TEST_CASE("forward splice skipping [50,100)", "[structure][splice]") {
  std::mt19937_64 rng(4);
  const auto seq = test::random_features(150, rng);
  const auto gt = GroundTruthMap::identity(150, seq.hop_seconds, seq.hop_seconds);
  const auto out = apply_splices(seq, gt, {{SpliceKind::forward_jump, 50, 100}});
  CHECK(out.features.frames() == 100);
  CHECK(out.score_frames[50] == 100);
  CHECK_THAT(out.ground_truth.score_time_at(50 * seq.hop_seconds), WithinAbs(100 * seq.hop_seconds, 1e-9));
  const std::vector<InflectionPoint> expected = {{49, 49}, {50, 100}};
  CHECK(out.inflections.points == expected);
}

TEST_CASE("splice kinds must match their direction", "[structure][splice]") {
  CHECK_THROWS_WITH(splice_frame_map({{SpliceKind::forward_jump, 50, 20}}, 100), ContainsSubstring("contradicts"));
  CHECK_THROWS_WITH(splice_frame_map({{SpliceKind::forward_jump, 30, 60}, {SpliceKind::backward_jump, 50, 10}}, 100),
                    ContainsSubstring("overlapping"));
}

TEST_CASE("ground truth extrapolation through splices", "[structure][splice]") {
  GroundTruthMap gt;
  for (int i = 0; i < 5; ++i) gt.events.push_back({static_cast<double>(i), 10.0 * i});

  SECTION("no splices leaves the map unchanged") {
    const auto out = extrapolate_ground_truth(gt, {}, 1.0);
    REQUIRE(out.events.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(out.events[i].score_time_s == gt.events[i].score_time_s);
  }
  SECTION("backward splice repeats annotations") {
    const auto out = extrapolate_ground_truth(gt, {{SpliceKind::backward_jump, 3, 1}}, 1.0);
    const std::vector<std::pair<double, double>> expected = {{0, 0},  {1, 10}, {2, 20}, {3, 10},
                                                             {4, 20}, {5, 30}, {6, 40}};
    REQUIRE(out.events.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(out.events[i].perf_time_s == expected[i].first);
      CHECK(out.events[i].score_time_s == expected[i].second);
    }
  }
  SECTION("forward splice drops annotations") {
    const auto out = extrapolate_ground_truth(gt, {{SpliceKind::forward_jump, 1, 3}}, 1.0);
    const std::vector<std::pair<double, double>> expected = {{0, 0}, {1, 30}, {2, 40}};
    REQUIRE(out.events.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(out.events[i].perf_time_s == expected[i].first);
      CHECK(out.events[i].score_time_s == expected[i].second);
    }
  }
}

TEST_CASE("synth_perturb contract", "[structure][perturb]") {
  std::mt19937_64 rng(10);
  const auto seq = test::random_features(120, rng);
  const auto gt = GroundTruthMap::identity(120, seq.hop_seconds, seq.hop_seconds);

  for (int n = 1; n <= kMaxJumps; ++n) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto a = synth_perturb(seq, gt, n, seed);
      const auto b = synth_perturb(seq, gt, n, seed);
      REQUIRE(a.features.data == b.features.data);
      REQUIRE(a.splices == b.splices);
      REQUIRE(format_splice_log_json(a, seed) == format_splice_log_json(b, seed));
      REQUIRE(a.inflections.size() == 2 * static_cast<std::size_t>(n));
      REQUIRE_NOTHROW(a.inflections.validate(a.features.frames(), seq.frames()));
      REQUIRE_NOTHROW(a.ground_truth.validate());

      // Segments and jumps respect the minimum length.
      std::size_t begin = 0;
      for (const auto& s : a.splices) {
        REQUIRE(s.split_frame - begin >= 10);
        const auto span = s.split_frame > s.resume_frame ? s.split_frame - s.resume_frame : s.resume_frame - s.split_frame;
        REQUIRE(span >= 10);
        begin = s.resume_frame;
      }
      REQUIRE(seq.frames() - begin >= 10);

      // Inverse frame map reconstructs the source order.
      for (std::size_t t = 0; t < a.frame_map.size(); ++t) {
        const auto src = seq.data.row(a.frame_map[t]);
        const auto row = a.features.data.row(t);
        REQUIRE(std::equal(src.begin(), src.end(), row.begin()));
        REQUIRE(a.score_frames[t] == a.frame_map[t]);
        REQUIRE_THAT(a.ground_truth.score_time_at(static_cast<double>(t) * seq.hop_seconds),
                     WithinAbs(static_cast<double>(a.frame_map[t]) * seq.hop_seconds, 1e-9));
      }
    }
  }
  CHECK_THROWS_WITH(synth_perturb(seq, gt, 5, 1), ContainsSubstring("[1, 4]"));
  CHECK_THROWS_WITH(synth_perturb(seq, gt, 0, 1), ContainsSubstring("[1, 4]"));
  const auto short_seq = test::random_features(60, rng);
  CHECK_THROWS_WITH(synth_perturb(short_seq, GroundTruthMap::identity(60, 0.1, 0.1), 4, 1),
                    ContainsSubstring("too short"));
}

TEST_CASE("oracle inflections let jump DTW recover perturbed structure", "[structure][perturb][property]") {
  std::mt19937_64 rng(31);
  const auto seq = test::random_features(100, rng);
  const auto gt = GroundTruthMap::identity(100, seq.hop_seconds, seq.hop_seconds);
  for (int n = 1; n <= kMaxJumps; ++n) {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
      const auto pert = synth_perturb(seq, gt, n, seed);
      const auto cost = cross_similarity(pert.features, seq);
      const auto path = jump_dtw_align(cost, pert.inflections);
      INFO("n=" << n << " seed=" << seed);
      REQUIRE(frame_pair_recovery(path, pert.score_frames, 2) >= 0.95);
    }
  }
}
