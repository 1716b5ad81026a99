#include "scoresync/softdtw.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scoresync/error.h"

namespace scoresync {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Three-way soft minimum that tolerates +inf entries.
double soft_min3(double a, double b, double c, double lambda) {
  const double lo = std::min({a, b, c});
  if (lambda == 0.0 || lo == kInf) return lo;
  const double s = std::exp(-(a - lo) / lambda) + std::exp(-(b - lo) / lambda) +
                   std::exp(-(c - lo) / lambda);
  return lo - lambda * std::log(s);
}

void check_sequences(std::span<const double> a, std::span<const double> b) {
  SCORESYNC_REQUIRE(!a.empty() && !b.empty(), "soft-DTW needs non-empty sequences");
  for (double v : a) SCORESYNC_REQUIRE(std::isfinite(v), "soft-DTW input contains a non-finite value");
  for (double v : b) SCORESYNC_REQUIRE(std::isfinite(v), "soft-DTW input contains a non-finite value");
}

}  // namespace

double soft_min(std::span<const double> values, double lambda) {
  SCORESYNC_REQUIRE(!values.empty(), "soft_min of an empty list");
  SCORESYNC_REQUIRE(lambda >= 0.0, "soft_min smoothing factor must be >= 0");
  for (double v : values) SCORESYNC_REQUIRE(std::isfinite(v), "soft_min input must be finite");
  const double lo = *std::min_element(values.begin(), values.end());
  if (lambda == 0.0) return lo;
  double s = 0.0;
  for (double v : values) s += std::exp(-(v - lo) / lambda);
  return lo - lambda * std::log(s);
}

SoftDtwWorkspace soft_dtw_forward(std::span<const double> pred, std::span<const double> target,
                                  double lambda, IndexCost cost) {
  check_sequences(pred, target);
  SCORESYNC_REQUIRE(lambda >= 0.0 && std::isfinite(lambda), "soft-DTW smoothing factor must be >= 0");
  const std::size_t p = pred.size();
  const std::size_t q = target.size();
  SoftDtwWorkspace ws;
  ws.lambda = lambda;
  ws.cost = Matrix(p, q);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < q; ++b) {
      const double d = pred[a] - target[b];
      ws.cost(a, b) = cost == IndexCost::squared ? d * d : std::abs(d);
    }
  }
  ws.r = Matrix(p + 2, q + 2, kInf);
  ws.r(0, 0) = 0.0;
  for (std::size_t i = 1; i <= p; ++i) {
    for (std::size_t j = 1; j <= q; ++j) {
      ws.r(i, j) = ws.cost(i - 1, j - 1) +
                   soft_min3(ws.r(i - 1, j - 1), ws.r(i - 1, j), ws.r(i, j - 1), lambda);
    }
  }
  return ws;
}

double soft_dtw(std::span<const double> pred, std::span<const double> target, double lambda,
                IndexCost cost) {
  const auto ws = soft_dtw_forward(pred, target, lambda, cost);
  return ws.r(pred.size(), target.size());
}

Matrix soft_dtw_alignment(const SoftDtwWorkspace& ws) {
  SCORESYNC_REQUIRE(ws.lambda > 0.0, "soft-DTW gradient requires lambda > 0");
  const std::size_t p = ws.cost.rows();
  const std::size_t q = ws.cost.cols();
  const double lambda = ws.lambda;

  // 1-based padded copies: cost and r get a zero / -inf border past the end.
  Matrix c(p + 2, q + 2, 0.0);
  for (std::size_t i = 1; i <= p; ++i) {
    for (std::size_t j = 1; j <= q; ++j) c(i, j) = ws.cost(i - 1, j - 1);
  }
  Matrix r = ws.r;
  for (std::size_t i = 1; i <= p; ++i) r(i, q + 1) = -kInf;
  for (std::size_t j = 1; j <= q; ++j) r(p + 1, j) = -kInf;
  r(p + 1, q + 1) = r(p, q);

  Matrix e(p + 2, q + 2, 0.0);
  e(p + 1, q + 1) = 1.0;
  for (std::size_t j = q; j >= 1; --j) {
    for (std::size_t i = p; i >= 1; --i) {
      const double a = std::exp((r(i + 1, j) - r(i, j) - c(i + 1, j)) / lambda);
      const double b = std::exp((r(i, j + 1) - r(i, j) - c(i, j + 1)) / lambda);
      const double d = std::exp((r(i + 1, j + 1) - r(i, j) - c(i + 1, j + 1)) / lambda);
      e(i, j) = e(i + 1, j) * a + e(i, j + 1) * b + e(i + 1, j + 1) * d;
    }
  }

  Matrix out(p, q);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < q; ++j) out(i, j) = e(i + 1, j + 1);
  }
  return out;
}

std::vector<double> soft_dtw_grad(std::span<const double> pred, std::span<const double> target,
                                  double lambda) {
  SCORESYNC_REQUIRE(lambda > 0.0, "soft-DTW gradient requires lambda > 0");
  const auto ws = soft_dtw_forward(pred, target, lambda, IndexCost::squared);
  const Matrix e = soft_dtw_alignment(ws);
  std::vector<double> g(pred.size(), 0.0);
  for (std::size_t a = 0; a < pred.size(); ++a) {
    for (std::size_t b = 0; b < target.size(); ++b) g[a] += e(a, b) * 2.0 * (pred[a] - target[b]);
  }
  return g;
}

std::vector<double> soft_dtw_grad_target(std::span<const double> pred, std::span<const double> target,
                                         double lambda) {
  SCORESYNC_REQUIRE(lambda > 0.0, "soft-DTW gradient requires lambda > 0");
  const auto ws = soft_dtw_forward(pred, target, lambda, IndexCost::squared);
  const Matrix e = soft_dtw_alignment(ws);
  std::vector<double> g(target.size(), 0.0);
  for (std::size_t a = 0; a < pred.size(); ++a) {
    for (std::size_t b = 0; b < target.size(); ++b) g[b] -= e(a, b) * 2.0 * (pred[a] - target[b]);
  }
  return g;
}

double soft_dtw_divergence(std::span<const double> pred, std::span<const double> target, double lambda) {
  SCORESYNC_REQUIRE(lambda > 0.0, "soft-DTW divergence requires lambda > 0");
  return soft_dtw(pred, target, lambda) -
         0.5 * (soft_dtw(pred, pred, lambda) + soft_dtw(target, target, lambda));
}

std::vector<double> soft_dtw_divergence_grad(std::span<const double> pred, std::span<const double> target,
                                             double lambda) {
  auto g = soft_dtw_grad(pred, target, lambda);
  const auto self_first = soft_dtw_grad(pred, pred, lambda);
  const auto self_second = soft_dtw_grad_target(pred, pred, lambda);
  for (std::size_t t = 0; t < g.size(); ++t) g[t] -= 0.5 * (self_first[t] + self_second[t]);
  return g;
}

}  // namespace scoresync
