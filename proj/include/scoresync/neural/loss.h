#pragma once

#include <span>
#include <vector>

#include "scoresync/neural/tensor.h"

namespace scoresync::neural {

/// Y = 0 marks a matching pair: 1/2 d^2. Y = 1: 1/2 max(0, margin - d)^2.
double contrastive_loss(double d_w, int label, double margin);
/// Derivative of contrastive_loss with respect to d_w.
double contrastive_loss_grad(double d_w, int label, double margin);

/// Euclidean distance between flattened embeddings of equal shape.
double embedding_distance(const Tensor& e1, const Tensor& e2);
/// Gradient of the distance with respect to e1 (the e2 gradient is its negation);
/// zero when the embeddings coincide.
Tensor embedding_distance_grad(const Tensor& e1, const Tensor& e2);

/// Unmasked mean squared error: padded target slots contribute like any other.
double mse_padded_loss(std::span<const double> pred, std::span<const double> target, double padding_value = 4096.0);
std::vector<double> mse_padded_loss_grad(std::span<const double> pred, std::span<const double> target);

}  // namespace scoresync::neural
