#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace scoresync::neural {

inline constexpr double kLayerGradTolerance = 1e-4;
inline constexpr double kNetworkGradTolerance = 1e-3;

/// One group of central-difference probes against an analytic gradient.
struct SuiteCase {
  explicit SuiteCase(std::string case_name = {}) : name(std::move(case_name)) {}

  std::string name;
  std::size_t instances = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  /// Worst relative error over all probes, and the worst per instance.
  double max_rel_err = 0.0;
  std::vector<double> instance_max_rel_err;
  double tolerance = kLayerGradTolerance;

  bool pass() const { return max_rel_err < tolerance; }
};

struct SuiteOptions {
  std::uint64_t seed = 0;
  /// soft-DTW instances (lengths 3..8, lambda cycling 0.05, 0.1, 0.5).
  std::size_t softdtw_instances = 100;
  /// Also check both toy regressors end to end (grid 16, sampled probes).
  bool networks = false;
};

/// soft-DTW and its divergence, dense, conv2d at dilations 1..3, SASA,
/// pad/relu/pool/unpool, the losses and a Siamese twin; optionally the
/// full toy networks. Deterministic in `seed`.
std::vector<SuiteCase> run_gradient_suite(const SuiteOptions& options = {});

nlohmann::json to_json(const SuiteCase& c);

}  // namespace scoresync::neural
