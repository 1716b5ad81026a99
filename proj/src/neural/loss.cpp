#include "scoresync/neural/loss.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "scoresync/error.h"

namespace scoresync::neural {

namespace {

void check_contrastive(double d_w, int label, double margin) {
  SCORESYNC_REQUIRE(std::isfinite(d_w) && d_w >= 0.0, "contrastive loss needs a distance >= 0");
  SCORESYNC_REQUIRE(label == 0 || label == 1, "contrastive label must be 0 (match) or 1 (non-match)");
  SCORESYNC_REQUIRE(std::isfinite(margin) && margin > 0.0, "contrastive margin must be > 0");
}

}  // namespace

double contrastive_loss(double d_w, int label, double margin) {
  check_contrastive(d_w, label, margin);
  if (label == 0) return 0.5 * d_w * d_w;
  const double gap = std::max(0.0, margin - d_w);
  return 0.5 * gap * gap;
}

double contrastive_loss_grad(double d_w, int label, double margin) {
  check_contrastive(d_w, label, margin);
  if (label == 0) return d_w;
  return d_w < margin ? -(margin - d_w) : 0.0;
}

double embedding_distance(const Tensor& e1, const Tensor& e2) {
  SCORESYNC_REQUIRE(e1.shape() == e2.shape(), "embedding shapes differ: " + shape_string(e1.shape()) + " vs " +
                                                  shape_string(e2.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    const double d = e1[i] - e2[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

Tensor embedding_distance_grad(const Tensor& e1, const Tensor& e2) {
  const double dist = embedding_distance(e1, e2);
  Tensor g(e1.shape());
  if (dist == 0.0) return g;
  for (std::size_t i = 0; i < e1.size(); ++i) g[i] = (e1[i] - e2[i]) / dist;
  return g;
}

double mse_padded_loss(std::span<const double> pred, std::span<const double> target, double padding_value) {
  SCORESYNC_REQUIRE(pred.size() == target.size(), "prediction length " + std::to_string(pred.size()) +
                                                      " does not match target length " +
                                                      std::to_string(target.size()));
  SCORESYNC_REQUIRE(!pred.empty(), "mse loss needs non-empty sequences");
  SCORESYNC_REQUIRE(std::isfinite(padding_value), "padding value must be finite");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

std::vector<double> mse_padded_loss_grad(std::span<const double> pred, std::span<const double> target) {
  SCORESYNC_REQUIRE(pred.size() == target.size() && !pred.empty(), "mse loss length mismatch");
  std::vector<double> g(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

}  // namespace scoresync::neural
