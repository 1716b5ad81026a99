#include "scoresync/neural/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "scoresync/error.h"

namespace scoresync::neural {

namespace {

// ReLU input signs and pooling argmaxes: the piecewise-linear region.
std::vector<std::size_t> region_signature(const Network& net, const ForwardState& state) {
  std::vector<std::size_t> sig;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto kind = net.layer(i).kind();
    const auto& c = state.caches[i];
    if (kind == "relu") {
      for (double v : c.input.values()) sig.push_back(v > 0.0 ? 1 : 0);
    } else if (kind == "maxpool") {
      sig.insert(sig.end(), c.mask.argmax.begin(), c.mask.argmax.end());
    }
  }
  return sig;
}

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t samples, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (samples == 0 || samples >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(samples);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

Objective random_linear_objective(std::size_t output_size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(output_size);
  for (auto& v : w) v = u(rng);
  return [w](const Tensor& y, Tensor& grad) {
    SCORESYNC_REQUIRE(y.size() == w.size(), "objective expects " + std::to_string(w.size()) + " outputs");
    grad = Tensor(y.shape());
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += w[i] * y[i];
      grad[i] = w[i];
    }
    return acc;
  };
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1e-6, std::abs(analytic), std::abs(numeric)});
}

GradCheckReport finite_diff_check(Network& net, const Tensor& input, const Objective& objective,
                                  const GradCheckOptions& options) {
  SCORESYNC_REQUIRE(options.h > 0.0, "finite-difference step must be > 0");
  SCORESYNC_REQUIRE(net.parameters_finite() && input.all_finite(), "gradient check needs finite parameters and input");

  ForwardState base;
  const Tensor out = net.forward(input, base);
  Tensor dy;
  objective(out, dy);
  Gradients grads = net.zero_gradients();
  const Tensor dx = net.backward(dy, base, grads);
  const auto base_sig = region_signature(net, base);

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);

  // Evaluates the objective at the current values; flags region changes.
  auto eval = [&](bool& kink) {
    ForwardState st;
    const Tensor y = net.forward(input, st);
    Tensor g;
    if (region_signature(net, st) != base_sig) kink = true;
    return objective(y, g);
  };

  auto probe = [&](double& slot, double analytic, const std::string& label) {
    const double keep = slot;
    bool kink = false;
    slot = keep + options.h;
    const double up = eval(kink);
    slot = keep - options.h;
    const double down = eval(kink);
    slot = keep;
    if (kink) {
      ++report.skipped_kinks;
      return;
    }
    const double numeric = (up - down) / (2.0 * options.h);
    const double err = relative_error(analytic, numeric);
    ++report.checked;
    if (err >= report.max_rel_err) {
      report.max_rel_err = err;
      report.worst = label;
    }
  };

  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& params = net.layer(i).params();
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t j : probe_indices(params[k].size(), options.samples_per_tensor, rng)) {
        probe(params[k][j], grads[i][k][j],
              "layer " + std::to_string(i) + " (" + net.layer(i).kind() + ") param " + std::to_string(k) + "[" +
                  std::to_string(j) + "]");
      }
    }
  }
  if (options.check_input) {
    Tensor x = input;
    // The input is probed through a mutable copy bound to the same evaluator.
    auto eval_x = [&](bool& kink) {
      ForwardState st;
      const Tensor y = net.forward(x, st);
      Tensor g;
      if (region_signature(net, st) != base_sig) kink = true;
      return objective(y, g);
    };
    for (std::size_t j : probe_indices(x.size(), options.samples_per_tensor, rng)) {
      const double keep = x[j];
      bool kink = false;
      x[j] = keep + options.h;
      const double up = eval_x(kink);
      x[j] = keep - options.h;
      const double down = eval_x(kink);
      x[j] = keep;
      if (kink) {
        ++report.skipped_kinks;
        continue;
      }
      const double err = relative_error(dx[j], (up - down) / (2.0 * options.h));
      ++report.checked;
      if (err >= report.max_rel_err) {
        report.max_rel_err = err;
        report.worst = "input[" + std::to_string(j) + "]";
      }
    }
  }
  return report;
}

}  // namespace scoresync::neural
