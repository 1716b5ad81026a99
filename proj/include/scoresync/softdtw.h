#pragma once

#include <span>
#include <vector>

#include "scoresync/matrix.h"

namespace scoresync {

/// Local cost between two scalar indices.
enum class IndexCost {
  squared,   // (a - b)^2, differentiable everywhere; used for training
  absolute,  // |a - b|, for lambda = 0 parity with hard DTW on index distance
};

inline constexpr double kDefaultSoftDtwLambda = 0.1;

/// min over values for lambda = 0, else -lambda * log(sum(exp(-v / lambda)))
/// evaluated with a max-shift.
double soft_min(std::span<const double> values, double lambda);

/// Forward tables for D_lambda between two index sequences. `r` is
/// (p+2) x (q+2): r(0,0) = 0, first row/column +inf, r(i+1, j+1) = D(i, j).
/// The extra trailing row/column is scratch for the backward pass.
struct SoftDtwWorkspace {
  Matrix cost;  // p x q
  Matrix r;
  double lambda = 0.0;
};

SoftDtwWorkspace soft_dtw_forward(std::span<const double> pred, std::span<const double> target,
                                  double lambda, IndexCost cost = IndexCost::squared);

double soft_dtw(std::span<const double> pred, std::span<const double> target, double lambda,
                IndexCost cost = IndexCost::squared);

/// Expected alignment matrix E = dD/dcost (p x q); requires lambda > 0.
Matrix soft_dtw_alignment(const SoftDtwWorkspace& ws);

/// dD_lambda/dpred. Squared cost only; requires lambda > 0.
std::vector<double> soft_dtw_grad(std::span<const double> pred, std::span<const double> target,
                                  double lambda);

/// dD_lambda/dtarget (the second argument). Squared cost only.
std::vector<double> soft_dtw_grad_target(std::span<const double> pred, std::span<const double> target,
                                         double lambda);

/// SD = D(pred, target) - (D(pred, pred) + D(target, target)) / 2.
double soft_dtw_divergence(std::span<const double> pred, std::span<const double> target, double lambda);

/// dSD/dpred, with pred counted in both slots of D(pred, pred).
std::vector<double> soft_dtw_divergence_grad(std::span<const double> pred, std::span<const double> target,
                                             double lambda);

}  // namespace scoresync
