#include "scoresync/eval.h"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "scoresync/error.h"

namespace scoresync {

TimedPath TimedPath::from_frames(const AlignmentPath& path, double perf_hop, double score_hop) {
  TimedPath out;
  out.perf_time_s.reserve(path.points.size());
  out.score_time_s.reserve(path.points.size());
  for (const auto& pt : path.points) {
    out.perf_time_s.push_back(static_cast<double>(pt.perf) * perf_hop);
    out.score_time_s.push_back(static_cast<double>(pt.score) * score_hop);
  }
  return out;
}

std::vector<double> alignment_errors(const TimedPath& predicted, const GroundTruthMap& gt) {
  SCORESYNC_REQUIRE(!gt.events.empty(), "ground truth has no events");
  SCORESYNC_REQUIRE(!predicted.perf_time_s.empty() &&
                        predicted.perf_time_s.size() == predicted.score_time_s.size(),
                    "predicted path is empty");

  // First point per distinct performance time.
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < predicted.perf_time_s.size(); ++k) {
    const double t = predicted.perf_time_s[k];
    if (!xs.empty()) {
      SCORESYNC_REQUIRE(t >= xs.back(), "predicted path is not monotone in performance time");
      if (t == xs.back()) continue;
    }
    xs.push_back(t);
    ys.push_back(predicted.score_time_s[k]);
  }

  const double span_tol = 1e-9;
  std::vector<double> errors;
  errors.reserve(gt.events.size());
  for (const auto& e : gt.events) {
    const double t = e.perf_time_s;
    SCORESYNC_REQUIRE(t >= xs.front() - span_tol && t <= xs.back() + span_tol,
                      "event at " + std::to_string(t) + " s is outside the path span [" +
                          std::to_string(xs.front()) + ", " + std::to_string(xs.back()) + "]");
    double estimate;
    if (t <= xs.front()) {
      estimate = ys.front();
    } else if (t >= xs.back()) {
      estimate = ys.back();
    } else {
      const auto it = std::upper_bound(xs.begin(), xs.end(), t);
      const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
      const std::size_t lo = hi - 1;
      const double w = (t - xs[lo]) / (xs[hi] - xs[lo]);
      estimate = ys[lo] + w * (ys[hi] - ys[lo]);
    }
    errors.push_back(estimate - e.score_time_s);
  }
  return errors;
}

std::vector<double> alignment_errors(const AlignmentPath& predicted, double perf_hop, double score_hop,
                                     const GroundTruthMap& gt) {
  return alignment_errors(TimedPath::from_frames(predicted, perf_hop, score_hop), gt);
}

AccuracyReport accuracy_at_margins(std::span<const double> errors_s) {
  SCORESYNC_REQUIRE(!errors_s.empty(), "no alignment errors to score");
  AccuracyReport report;
  report.n_events = errors_s.size();
  for (std::size_t k = 0; k < kThresholdsMs.size(); ++k) {
    const double tau = kThresholdsMs[k] / 1000.0;
    std::size_t hit = 0;
    for (double e : errors_s) {
      if (std::abs(e) < tau) ++hit;
    }
    report.accuracy_pct[k] = 100.0 * static_cast<double>(hit) / static_cast<double>(errors_s.size());
  }
  return report;
}

AccuracyReport aggregate_reports(std::span<const AccuracyReport> pieces, bool pooled) {
  SCORESYNC_REQUIRE(!pieces.empty(), "no per-piece reports to aggregate");
  AccuracyReport out;
  double weight_sum = 0.0;
  for (const auto& r : pieces) {
    const double w = pooled ? static_cast<double>(r.n_events) : 1.0;
    weight_sum += w;
    out.n_events += r.n_events;
    for (std::size_t k = 0; k < out.accuracy_pct.size(); ++k) out.accuracy_pct[k] += w * r.accuracy_pct[k];
  }
  SCORESYNC_REQUIRE(weight_sum > 0.0, "aggregate over zero events");
  for (double& v : out.accuracy_pct) v /= weight_sum;
  return out;
}

double inflection_accuracy(const InflectionPointSet& pred, const InflectionPointSet& gt, std::size_t tol_frames) {
  const std::size_t denom = std::max(pred.size(), gt.size());
  if (denom == 0) return 100.0;
  std::vector<bool> used(gt.size(), false);
  std::size_t matched = 0;
  auto within = [tol_frames](std::size_t a, std::size_t b) { return (a > b ? a - b : b - a) <= tol_frames; };
  for (const auto& p : pred.points) {
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (used[g]) continue;
      if (within(p.perf, gt.points[g].perf) && within(p.score, gt.points[g].score)) {
        used[g] = true;
        ++matched;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(matched) / static_cast<double>(denom);
}

double frame_pair_recovery(const AlignmentPath& path, std::span<const std::size_t> reference_score_frames,
                           std::size_t tol_frames) {
  SCORESYNC_REQUIRE(!reference_score_frames.empty(), "no reference frame pairs");
  SCORESYNC_REQUIRE(!path.points.empty(), "empty path");
  const std::size_t n = reference_score_frames.size();
  constexpr auto unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> mapped(n, unset);
  for (const auto& pt : path.points) {
    if (pt.perf < n && mapped[pt.perf] == unset) mapped[pt.perf] = pt.score;
  }
  std::size_t carry = path.points.front().score;
  std::size_t hit = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (mapped[t] == unset) {
      mapped[t] = carry;
    }
    carry = mapped[t];
    const std::size_t ref = reference_score_frames[t];
    const std::size_t diff = mapped[t] > ref ? mapped[t] - ref : ref - mapped[t];
    if (diff <= tol_frames) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(n);
}

DieboldMarianoResult diebold_mariano(std::span<const double> errors_a, std::span<const double> errors_b) {
  SCORESYNC_REQUIRE(errors_a.size() == errors_b.size(), "Diebold-Mariano needs paired error lists of equal length");
  const std::size_t n = errors_a.size();
  SCORESYNC_REQUIRE(n >= 8, "Diebold-Mariano needs at least 8 paired errors");

  std::vector<double> d(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = errors_a[i] * errors_a[i] - errors_b[i] * errors_b[i];
    mean += d[i];
  }
  const double nn = static_cast<double>(n);
  mean /= nn;
  double gamma0 = 0.0;
  for (double v : d) gamma0 += (v - mean) * (v - mean);
  gamma0 /= nn;

  DieboldMarianoResult out;
  if (gamma0 <= 0.0 || !std::isfinite(gamma0)) {
    out.degenerate = true;
    return out;
  }
  const double h = 1.0;
  const double dm = mean / std::sqrt(gamma0 / nn);
  const double correction = std::sqrt((nn + 1.0 - 2.0 * h + h * (h - 1.0) / nn) / nn);
  out.statistic = dm * correction;
  const boost::math::students_t dist(nn - 1.0);
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.statistic)));
  return out;
}

}  // namespace scoresync
