#include "scoresync/structure.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "scoresync/error.h"

namespace scoresync {

using json = nlohmann::json;

void InflectionPointSet::validate(std::size_t perf_frames, std::size_t score_frames) const {
  SCORESYNC_REQUIRE(points.size() % 2 == 0,
                    "inflection point count must be even, got " + std::to_string(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    SCORESYNC_REQUIRE(pt.perf < perf_frames && pt.score < score_frames,
                      "inflection point " + std::to_string(i) + " (" + std::to_string(pt.perf) + ", " +
                          std::to_string(pt.score) + ") is outside the " + std::to_string(perf_frames) +
                          "x" + std::to_string(score_frames) + " matrix");
    if (i > 0) {
      SCORESYNC_REQUIRE(pt.perf > points[i - 1].perf,
                        "inflection performance coordinates must be strictly increasing (point " +
                            std::to_string(i) + ")");
    }
  }
}

InflectionPointSet parse_inflections_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed inflection JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("points") || !doc["points"].is_array()) {
    throw InputError("inflection JSON must be an object with a \"points\" array");
  }
  InflectionPointSet set;
  for (const auto& p : doc["points"]) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() || !p[1].is_number_unsigned()) {
      throw InputError("each inflection point must be a pair of non-negative integers");
    }
    set.points.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>()});
  }
  return set;
}

std::string format_inflections_json(const InflectionPointSet& set) {
  json pts = json::array();
  for (const auto& p : set.points) pts.push_back({p.perf, p.score});
  return json{{"points", pts}}.dump();
}

namespace {

struct JumpWindow {
  std::size_t source_perf, source_score;
  std::size_t row_lo, row_hi, col_lo, col_hi;  // inclusive

  bool contains(std::size_t m, std::size_t n) const {
    return m >= row_lo && m <= row_hi && n >= col_lo && n <= col_hi;
  }
};

std::vector<JumpWindow> jump_windows(const InflectionPointSet& infl, std::size_t p, std::size_t q) {
  std::vector<JumpWindow> out;
  for (std::size_t k = 0; k + 1 < infl.points.size(); k += 2) {
    const auto& src = infl.points[k];
    const auto& dst = infl.points[k + 1];
    JumpWindow w{src.perf, src.score, 0, 0, 0, 0};
    w.row_lo = std::max(dst.perf >= kJumpHalfWidth ? dst.perf - kJumpHalfWidth : 0, src.perf + 1);
    w.row_hi = std::min(dst.perf + kJumpHalfWidth, p - 1);
    w.col_lo = dst.score >= kJumpHalfWidth ? dst.score - kJumpHalfWidth : 0;
    w.col_hi = std::min(dst.score + kJumpHalfWidth, q - 1);
    out.push_back(w);
  }
  return out;
}

enum Step : int { kStart = -1, kDiag = 0, kScoreAdvance = 1, kPerfAdvance = 2, kJumpBase = 3 };

}  // namespace

AlignmentPath jump_dtw_align(const CrossSimilarityMatrix& cost, const InflectionPointSet& infl) {
  check_cost_matrix(cost);
  const std::size_t p = cost.rows();
  const std::size_t q = cost.cols();
  infl.validate(p, q);
  const auto windows = jump_windows(infl, p, q);

  Matrix d(p, q);
  std::vector<int> choice(p * q, kStart);
  for (std::size_t m = 0; m < p; ++m) {
    for (std::size_t n = 0; n < q; ++n) {
      if (m == 0 && n == 0) {
        d(0, 0) = cost(0, 0);
        continue;
      }
      double best;
      int step;
      if (m == 0) {
        best = d(0, n - 1);
        step = kScoreAdvance;
      } else if (n == 0) {
        best = d(m - 1, 0);
        step = kPerfAdvance;
      } else {
        const double diag = d(m - 1, n - 1);
        const double score_adv = d(m, n - 1);
        const double perf_adv = d(m - 1, n);
        if (diag <= score_adv && diag <= perf_adv) {
          best = diag;
          step = kDiag;
        } else if (score_adv <= perf_adv) {
          best = score_adv;
          step = kScoreAdvance;
        } else {
          best = perf_adv;
          step = kPerfAdvance;
        }
      }
      for (std::size_t k = 0; k < windows.size(); ++k) {
        const auto& w = windows[k];
        if (!w.contains(m, n)) continue;
        const double via = d(w.source_perf, w.source_score);
        if (via < best) {
          best = via;
          step = kJumpBase + static_cast<int>(k);
        }
      }
      d(m, n) = cost(m, n) + best;
      choice[m * q + n] = step;
    }
  }

  AlignmentPath path;
  path.total_cost = d(p - 1, q - 1);
  std::size_t m = p - 1;
  std::size_t n = q - 1;
  std::vector<PathPoint> rev;
  while (true) {
    const int step = choice[m * q + n];
    rev.push_back({m, n, false});
    if (step == kStart) break;
    switch (step) {
      case kDiag:
        --m;
        --n;
        break;
      case kScoreAdvance:
        --n;
        break;
      case kPerfAdvance:
        --m;
        break;
      default: {
        rev.back().jump = true;
        const auto& w = windows[static_cast<std::size_t>(step - kJumpBase)];
        m = w.source_perf;
        n = w.source_score;
      }
    }
  }
  std::reverse(rev.begin(), rev.end());
  path.points = std::move(rev);
  return path;
}

namespace {

struct JumpBruteForce {
  const CrossSimilarityMatrix& cost;
  const std::vector<JumpWindow>& windows;
  std::vector<PathPoint> current;
  std::vector<PathPoint> best;
  double best_cost = std::numeric_limits<double>::infinity();

  void visit(std::size_t i, std::size_t j, bool jumped, double acc) {
    // Costs are non-negative, so a prefix that already ties the best cannot win.
    if (acc >= best_cost) return;
    current.push_back({i, j, jumped});
    const std::size_t p = cost.rows();
    const std::size_t q = cost.cols();
    if (i + 1 == p && j + 1 == q) {
      best_cost = acc;
      best = current;
    }
    if (i + 1 < p && j + 1 < q) visit(i + 1, j + 1, false, acc + cost(i + 1, j + 1));
    if (j + 1 < q) visit(i, j + 1, false, acc + cost(i, j + 1));
    if (i + 1 < p) visit(i + 1, j, false, acc + cost(i + 1, j));
    for (const auto& w : windows) {
      if (w.source_perf != i || w.source_score != j) continue;
      for (std::size_t m = w.row_lo; m <= w.row_hi && m < p; ++m) {
        for (std::size_t n = w.col_lo; n <= w.col_hi; ++n) visit(m, n, true, acc + cost(m, n));
      }
    }
    current.pop_back();
  }
};

}  // namespace

AlignmentPath jump_dtw_brute_force(const CrossSimilarityMatrix& cost, const InflectionPointSet& infl) {
  check_cost_matrix(cost);
  SCORESYNC_REQUIRE(cost.rows() + cost.cols() <= kJumpBruteForceLimit,
                    "instance above enumeration bound: p+q = " + std::to_string(cost.rows() + cost.cols()) +
                        " > " + std::to_string(kJumpBruteForceLimit));
  SCORESYNC_REQUIRE(infl.size() <= 2, "jump brute force supports at most one inflection pair");
  infl.validate(cost.rows(), cost.cols());
  const auto windows = jump_windows(infl, cost.rows(), cost.cols());
  JumpBruteForce search{cost, windows, {}, {}};
  search.visit(0, 0, false, cost(0, 0));
  return {std::move(search.best), search.best_cost};
}

std::string_view to_string(SpliceKind kind) {
  return kind == SpliceKind::backward_jump ? "backward_jump" : "forward_jump";
}

namespace {

struct Segment {
  std::size_t begin;  // source frame, inclusive
  std::size_t end;    // source frame, exclusive
};

std::vector<Segment> segments_of(const std::vector<SpliceOp>& splices, std::size_t source_frames) {
  std::vector<Segment> segs;
  std::size_t begin = 0;
  for (std::size_t k = 0; k < splices.size(); ++k) {
    const auto& s = splices[k];
    SCORESYNC_REQUIRE(s.split_frame <= source_frames && s.resume_frame < source_frames,
                      "splice " + std::to_string(k) + " is out of bounds");
    SCORESYNC_REQUIRE(s.split_frame > begin,
                      "overlapping splices: splice " + std::to_string(k) + " splits at frame " +
                          std::to_string(s.split_frame) + " before its segment starts at " + std::to_string(begin));
    const bool backward = s.resume_frame < s.split_frame;
    const bool forward = s.resume_frame > s.split_frame;
    SCORESYNC_REQUIRE((s.kind == SpliceKind::backward_jump && backward) ||
                          (s.kind == SpliceKind::forward_jump && forward),
                      "splice " + std::to_string(k) + " direction contradicts its kind");
    segs.push_back({begin, s.split_frame});
    begin = s.resume_frame;
  }
  SCORESYNC_REQUIRE(begin < source_frames, "last segment is empty");
  segs.push_back({begin, source_frames});
  return segs;
}

}  // namespace

std::vector<std::size_t> splice_frame_map(const std::vector<SpliceOp>& splices, std::size_t source_frames) {
  std::vector<std::size_t> map;
  for (const auto& seg : segments_of(splices, source_frames)) {
    for (std::size_t f = seg.begin; f < seg.end; ++f) map.push_back(f);
  }
  return map;
}

GroundTruthMap extrapolate_ground_truth(const GroundTruthMap& gt, const std::vector<SpliceOp>& splices,
                                        double hop_seconds) {
  SCORESYNC_REQUIRE(hop_seconds > 0.0, "hop_seconds must be positive");
  if (splices.empty()) return gt;
  std::size_t horizon = 0;
  for (const auto& s : splices) horizon = std::max({horizon, s.split_frame, s.resume_frame + 1});
  // The last segment is open-ended; give it room for every annotated event.
  const double last_t = gt.events.empty() ? 0.0 : gt.events.back().perf_time_s;
  horizon = std::max(horizon, static_cast<std::size_t>(std::ceil(last_t / hop_seconds)) + 1);
  const auto segs = segments_of(splices, horizon);

  GroundTruthMap out;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const auto& seg = segs[k];
    const double t0 = static_cast<double>(seg.begin) * hop_seconds;
    const double t1 = static_cast<double>(seg.end) * hop_seconds;
    const bool last = k + 1 == segs.size();
    for (const auto& e : gt.events) {
      if (e.perf_time_s < t0) continue;
      if (!last && e.perf_time_s >= t1) continue;
      const double shifted =
          static_cast<double>(offset) * hop_seconds + (e.perf_time_s - t0);
      out.events.push_back({shifted, e.score_time_s});
    }
    offset += seg.end - seg.begin;
  }
  return out;
}

Perturbation synth_perturb(const FeatureSequence& seq, const GroundTruthMap& gt, int n_jumps,
                           std::uint64_t seed, const PerturbOptions& options) {
  SCORESYNC_REQUIRE(n_jumps >= 1 && n_jumps <= kMaxJumps,
                    "n_jumps must be in [1, 4], got " + std::to_string(n_jumps));
  seq.validate();
  gt.validate();
  const std::size_t frames = seq.frames();
  const std::size_t min_seg = options.min_segment;
  SCORESYNC_REQUIRE(frames >= 2 * min_seg * static_cast<std::size_t>(n_jumps),
                    "sequence too short for requested jumps: " + std::to_string(frames) + " frames, need " +
                        std::to_string(2 * min_seg * static_cast<std::size_t>(n_jumps)));

  std::mt19937_64 rng(seed);
  auto uniform = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  std::vector<SpliceOp> plan;
  constexpr int kMaxAttempts = 100000;
  for (int attempt = 0; attempt < kMaxAttempts && plan.empty(); ++attempt) {
    std::vector<SpliceOp> trial;
    std::size_t seg_begin = 0;
    bool ok = true;
    for (int k = 0; k < n_jumps && ok; ++k) {
      const bool more = k + 1 < n_jumps;
      // Where the next segment may begin and still leave room for the rest.
      const std::size_t resume_cap = frames - (more ? 2 * min_seg : min_seg);
      const auto kind = uniform(0, 1) == 0 ? SpliceKind::backward_jump : SpliceKind::forward_jump;
      const std::size_t split_lo = seg_begin + min_seg;
      const std::size_t split_hi = frames - min_seg;
      if (split_lo > split_hi) {
        ok = false;
        break;
      }
      const std::size_t split = uniform(split_lo, split_hi);
      std::size_t lo, hi;
      if (kind == SpliceKind::backward_jump) {
        lo = 0;
        hi = std::min(split - min_seg, resume_cap);
      } else {
        lo = split + min_seg;
        hi = resume_cap;
      }
      if (lo > hi) {
        ok = false;
        break;
      }
      const std::size_t resume = uniform(lo, hi);
      trial.push_back({kind, split, resume});
      seg_begin = resume;
    }
    if (ok && frames - seg_begin >= min_seg) plan = std::move(trial);
  }
  SCORESYNC_ASSERT(!plan.empty(), "failed to sample a feasible splice plan");
  Perturbation out = apply_splices(seq, gt, std::move(plan), options);
  SCORESYNC_ASSERT(out.inflections.size() == 2 * static_cast<std::size_t>(n_jumps),
                   "inflection count does not match the number of jumps");
  return out;
}

Perturbation apply_splices(const FeatureSequence& seq, const GroundTruthMap& gt, std::vector<SpliceOp> plan,
                           const PerturbOptions& options) {
  seq.validate();
  gt.validate();
  const std::size_t frames = seq.frames();
  const double score_hop = options.score_hop_seconds > 0.0 ? options.score_hop_seconds : seq.hop_seconds;

  Perturbation out;
  out.splices = std::move(plan);
  const auto& plan_ref = out.splices;
  out.frame_map = splice_frame_map(plan_ref, frames);
  out.features.hop_seconds = seq.hop_seconds;
  out.features.origin = seq.origin;
  out.features.data = Matrix(out.frame_map.size(), seq.bins());
  for (std::size_t t = 0; t < out.frame_map.size(); ++t) {
    const auto src = seq.data.row(out.frame_map[t]);
    std::copy(src.begin(), src.end(), out.features.data.row(t).begin());
  }
  out.ground_truth = extrapolate_ground_truth(gt, plan_ref, seq.hop_seconds);

  auto score_frame_of = [&](std::size_t source_frame) {
    const double st = gt.score_time_at(static_cast<double>(source_frame) * seq.hop_seconds);
    return static_cast<std::size_t>(std::max(0L, std::lround(st / score_hop)));
  };
  out.score_frames.reserve(out.frame_map.size());
  for (std::size_t src : out.frame_map) out.score_frames.push_back(score_frame_of(src));

  for (std::size_t t = 1; t < out.frame_map.size(); ++t) {
    if (out.frame_map[t] != out.frame_map[t - 1] + 1) {
      out.inflections.points.push_back({t - 1, out.score_frames[t - 1]});
      out.inflections.points.push_back({t, out.score_frames[t]});
    }
  }
  return out;
}

std::string format_splice_log_json(const Perturbation& p, std::uint64_t seed) {
  json splices = json::array();
  std::size_t output_frame = 0;
  std::size_t begin = 0;
  for (const auto& s : p.splices) {
    output_frame += s.split_frame - begin;
    splices.push_back({{"kind", std::string(to_string(s.kind))},
                       {"split_frame", s.split_frame},
                       {"resume_frame", s.resume_frame},
                       {"output_frame", output_frame}});
    begin = s.resume_frame;
  }
  return json{{"seed", seed},
              {"n_jumps", p.splices.size()},
              {"output_frames", p.frame_map.size()},
              {"splices", splices}}
      .dump(2);
}

}  // namespace scoresync
