#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "scoresync/neural/network.h"

namespace scoresync::neural {

/// Scalar objective on a network output; writes dL/d(output) into `grad`.
using Objective = std::function<double(const Tensor& output, Tensor& grad)>;

/// L = sum_i w_i y_i with fixed seeded weights w in [-1, 1].
Objective random_linear_objective(std::size_t output_size, std::uint64_t seed);

struct GradCheckOptions {
  double h = 1e-4;
  /// Parameters probed per tensor; 0 checks every entry.
  std::size_t samples_per_tensor = 0;
  std::uint64_t seed = 0;
  bool check_input = true;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  /// Probes whose +-h step changed a ReLU sign or pooling argmax; the
  /// objective is not differentiable across such a step, so they are skipped.
  std::size_t skipped_kinks = 0;
  std::string worst;
};

/// |a - n| / max(1e-6, |a|, |n|).
double relative_error(double analytic, double numeric);

/// Central differences for every (or a sampled subset of) parameter and input
/// entry, against the analytic backward pass.
GradCheckReport finite_diff_check(Network& net, const Tensor& input, const Objective& objective,
                                  const GradCheckOptions& options = {});

}  // namespace scoresync::neural
