// Acceptance suite: one PASS/FAIL line per criterion, indented detail lines
// below it. Exit status is 0 only when every selected criterion passes.
//
//   acceptance            run all criteria
//   acceptance 1 4 11     run a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.h"
#include "scoresync/alignment_io.h"
#include "scoresync/audio.h"
#include "scoresync/dtw.h"
#include "scoresync/eval.h"
#include "scoresync/features.h"
#include "scoresync/neural/gradient_suite.h"
#include "scoresync/neural/layers.h"
#include "scoresync/neural/models.h"
#include "scoresync/softdtw.h"
#include "scoresync/structure.h"
#include "test_util.h"

using namespace scoresync;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kDtwRuntimeLimitS = 10.0;
constexpr double kRecoveryJump = 0.95;
constexpr double kRecoveryClassic = 0.70;
constexpr std::size_t kRecoveryTolFrames = 2;
constexpr double kSoftLimitTol = 1e-2;
constexpr double kAxiomTol = 1e-9;
constexpr double kInflectionTargetFrames = 3.0;
constexpr double kInflectionRuntimeLimitS = 15 * 60.0;
constexpr double kPathTargetFrames = 4.0;
constexpr int kSeeds = 5;
constexpr int kDilationWinsNeeded = 4;
constexpr int kSasaWinsNeeded = 4;
constexpr int kDivergenceWinsNeeded = 3;
constexpr std::size_t kToyInstances = 500;

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome dtw_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  int mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    const auto cost = test::random_matrix(dim(rng), dim(rng), rng);
    if (dtw_align(cost).total_cost != dtw_brute_force(cost).total_cost) ++mismatches;
  }
  const double elapsed = seconds_since(t0);
  return {mismatches == 0 && elapsed < kDtwRuntimeLimitS,
          "500 matrices, " + std::to_string(mismatches) + " mismatches, " + fmt(elapsed, 3) + " s",
          {}};
}

Outcome jump_oracle() {
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  std::bernoulli_distribution with_pair(0.8);
  int mismatches = 0, above_classic = 0, with_jump = 0, n = 0;
  while (n < 200) {
    const std::size_t p = dim(rng), q = dim(rng);
    if (p + q > kJumpBruteForceLimit) continue;
    const auto cost = test::random_matrix(p, q, rng);
    InflectionPointSet infl;
    if (p >= 2 && with_pair(rng)) {
      std::uniform_int_distribution<std::size_t> row(0, p - 1), col(0, q - 1);
      std::size_t a0 = row(rng), a1 = row(rng);
      if (a0 == a1) continue;
      if (a0 > a1) std::swap(a0, a1);
      infl.points = {{a0, col(rng)}, {a1, col(rng)}};
      ++with_jump;
    }
    const double fast = jump_dtw_align(cost, infl).total_cost;
    if (fast != jump_dtw_brute_force(cost, infl).total_cost) ++mismatches;
    if (fast > dtw_align(cost).total_cost) ++above_classic;
    ++n;
  }
  return {mismatches == 0 && above_classic == 0,
          "200 instances (" + std::to_string(with_jump) + " with a pair), " + std::to_string(mismatches) +
              " oracle mismatches, " + std::to_string(above_classic) + " above classic cost",
          {}};
}

Outcome structure_recovery() {
  std::mt19937_64 rng(1003);
  const auto seq = test::random_features(120, rng, 0.05);
  const auto gt = GroundTruthMap::identity(seq.frames(), seq.hop_seconds, seq.hop_seconds);
  double worst_jump = 1.0, sum_classic = 0.0, max_classic = 0.0;
  std::array<double, kMaxJumps> classic_by_jumps{};
  std::array<int, kMaxJumps> count_by_jumps{};
  int cases = 0;
  for (int k = 0; k < 50; ++k) {
    const int jumps = 1 + k % kMaxJumps;
    const auto pert = synth_perturb(seq, gt, jumps, 5000 + static_cast<std::uint64_t>(k));
    const auto cost = cross_similarity(pert.features, seq);
    const double rj = frame_pair_recovery(jump_dtw_align(cost, pert.inflections), pert.score_frames, kRecoveryTolFrames);
    const double rc = frame_pair_recovery(dtw_align(cost), pert.score_frames, kRecoveryTolFrames);
    worst_jump = std::min(worst_jump, rj);
    sum_classic += rc;
    max_classic = std::max(max_classic, rc);
    classic_by_jumps[jumps - 1] += rc;
    count_by_jumps[jumps - 1] += 1;
    ++cases;
  }
  const double mean_classic = sum_classic / cases;
  Outcome o{worst_jump >= kRecoveryJump && mean_classic < kRecoveryClassic,
            "jump DTW worst case " + fmt(100 * worst_jump) + "% (need >= 95%), classic DTW mean " +
                fmt(100 * mean_classic) + "% (need < 70%)",
            {"classic DTW best single case " + fmt(100 * max_classic) + "%"}};
  for (int j = 0; j < kMaxJumps; ++j) {
    o.details.push_back("classic DTW mean with " + std::to_string(j + 1) + " jump(s): " +
                        fmt(100 * classic_by_jumps[j] / count_by_jumps[j]) + "% over " +
                        std::to_string(count_by_jumps[j]) + " cases");
  }
  return o;
}

// Hard DTW on the squared index distance, through the classic aligner.
double hard_dtw(const std::vector<double>& a, const std::vector<double>& b) {
  Matrix c(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) c(i, j) = (a[i] - b[j]) * (a[i] - b[j]);
  }
  return dtw_align(c).total_cost;
}

std::vector<double> random_indices(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(1, 8);
  std::uniform_real_distribution<double> u(0.0, 8.0);
  std::vector<double> v(len(rng));
  for (auto& x : v) x = u(rng);
  return v;
}

Outcome soft_limit() {
  std::mt19937_64 rng(1004);
  double worst_gap = 0.0;
  int non_monotone = 0;
  for (int i = 0; i < 100; ++i) {
    const auto a = random_indices(rng), b = random_indices(rng);
    const double hard = hard_dtw(a, b);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {1.0, 0.1, 0.01, 0.001}) {
      const double gap = std::abs(soft_dtw(a, b, lambda) - hard);
      if (gap > prev) ++non_monotone;
      prev = gap;
    }
    worst_gap = std::max(worst_gap, prev);
  }
  return {worst_gap <= kSoftLimitTol && non_monotone == 0,
          "worst |soft(1e-3) - hard| = " + fmt(worst_gap) + ", " + std::to_string(non_monotone) +
              " non-monotone steps",
          {}};
}

Outcome divergence_axioms() {
  std::mt19937_64 rng(1005);
  double min_sd = 0.0, max_self = 0.0, max_asym = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double lambda = std::array{0.05, 0.1, 0.5, 1.0}[i % 4];
    const auto a = random_indices(rng), b = random_indices(rng);
    const double ab = soft_dtw_divergence(a, b, lambda);
    min_sd = std::min(min_sd, ab);
    max_self = std::max(max_self, std::abs(soft_dtw_divergence(a, a, lambda)));
    max_asym = std::max(max_asym, std::abs(ab - soft_dtw_divergence(b, a, lambda)));
  }
  return {min_sd >= -kAxiomTol && max_self <= kAxiomTol && max_asym <= kAxiomTol,
          "min SD " + fmt(min_sd) + ", max |SD(Y,Y)| " + fmt(max_self) + ", max asymmetry " + fmt(max_asym),
          {}};
}

Outcome gradient_fidelity() {
  neural::SuiteOptions opt;
  opt.networks = true;
  const auto cases = neural::run_gradient_suite(opt);
  Outcome o;
  o.pass = true;
  double layer_worst = 0.0, net_worst = 0.0;
  for (const auto& c : cases) {
    o.pass = o.pass && c.pass();
    (c.tolerance == neural::kNetworkGradTolerance ? net_worst : layer_worst) =
        std::max(c.tolerance == neural::kNetworkGradTolerance ? net_worst : layer_worst, c.max_rel_err);
    o.details.push_back(c.name + ": " + fmt(c.max_rel_err) + " over " + std::to_string(c.checked) + " probes (tol " +
                        fmt(c.tolerance) + ")" + (c.pass() ? "" : "  FAILED"));
  }
  std::ostringstream out, err;
  const int code = cli::run({"gradcheck"}, out, err);
  o.pass = o.pass && code == 0;
  o.summary = "layers/losses max " + fmt(layer_worst) + " (< 1e-4), networks max " + fmt(net_worst) +
              " (< 1e-3), `gradcheck` exit " + std::to_string(code);
  return o;
}

// Zero-interleaved kernel built independently of the library.
neural::Tensor interleave(const neural::Tensor& k, std::size_t d) {
  const std::size_t out = k.dim(0), in = k.dim(1), m = k.dim(2), e = d * (m - 1) + 1;
  neural::Tensor z({out, in, e, e});
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t c = 0; c < in; ++c) {
      for (std::size_t t = 0; t < m; ++t) {
        for (std::size_t s = 0; s < m; ++s) {
          z[((o * in + c) * e + d * t) * e + d * s] = k[((o * in + c) * m + t) * m + s];
        }
      }
    }
  }
  return z;
}

Outcome dilation_identities() {
  std::mt19937_64 rng(1007);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> side(13, 20), chans(1, 3), msz(1, 4);
  auto random = [&](neural::Shape shape) {
    neural::Tensor t(std::move(shape));
    for (auto& v : t.values()) v = u(rng);
    return t;
  };
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t d = 2 + i % 2, c = chans(rng), o = chans(rng), m = msz(rng);
    const auto x = random({c, side(rng), side(rng)});
    const auto k = random({o, c, m, m});
    const auto b = random({o});
    if (!(neural::conv2d_forward(x, k, b, d) == neural::conv2d_forward(x, interleave(k, d), b, 1))) ++mismatches;
  }
  int size_errors = 0;
  for (std::size_t m = 1; m <= 7; ++m) {
    for (std::size_t d = 1; d <= 7; ++d) {
      if (neural::effective_kernel_size(m, d) != m + (m - 1) * (d - 1)) ++size_errors;
    }
  }
  return {mismatches == 0 && size_errors == 0,
          "100 inputs, " + std::to_string(mismatches) + " inexact; effective size wrong for " +
              std::to_string(size_errors) + " of 49 (m, d)",
          {}};
}

Outcome inflection_regressor() {
  using namespace neural;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  int wins = 0;
  double sum_progressive = 0.0;
  for (int s = 1; s <= kSeeds; ++s) {
    const auto data = make_inflection_dataset(kToyInstances, static_cast<std::uint64_t>(s));
    ToyConfig cfg = default_toy_config(ToyTask::inflection);
    cfg.seed = static_cast<std::uint64_t>(s);
    const double progressive = train_inflection_regressor(data, cfg).report.final_validation_error;
    cfg.dilations = {1, 1, 1};
    const double flat = train_inflection_regressor(data, cfg).report.final_validation_error;
    wins += progressive < flat ? 1 : 0;
    sum_progressive += progressive;
    o.details.push_back("seed " + std::to_string(s) + ": dilations 1,2,3 -> " + fmt(progressive) +
                        " frames, all d=1 -> " + fmt(flat) + " frames");
  }
  const double mean = sum_progressive / kSeeds;
  const double elapsed = seconds_since(t0);
  o.pass = mean < kInflectionTargetFrames && wins >= kDilationWinsNeeded && elapsed < kInflectionRuntimeLimitS;
  o.summary = "mean validation error " + fmt(mean) + " frames (need < 3), progressive wins " + std::to_string(wins) +
              "/5 (need >= 4), " + fmt(elapsed, 4) + " s (need < 900)";
  return o;
}

Outcome path_regressor() {
  using namespace neural;
  Outcome o;
  int sasa_wins = 0, divergence_wins = 0;
  double sum_sasa = 0.0;
  for (int s = 1; s <= kSeeds; ++s) {
    const auto data = make_path_dataset(kToyInstances, static_cast<std::uint64_t>(s));
    ToyConfig cfg = default_toy_config(ToyTask::path);
    cfg.seed = static_cast<std::uint64_t>(s);
    const double sasa = train_path_regressor(data, cfg).report.final_validation_error;
    ToyConfig conv = cfg;
    conv.use_sasa = false;
    const double conv_err = train_path_regressor(data, conv).report.final_validation_error;
    ToyConfig mse = cfg;
    mse.loss = PathLoss::mse;
    const double mse_err = train_path_regressor(data, mse).report.final_validation_error;
    sasa_wins += sasa < conv_err ? 1 : 0;
    divergence_wins += sasa < mse_err ? 1 : 0;
    sum_sasa += sasa;
    o.details.push_back("seed " + std::to_string(s) + ": SASA+SD " + fmt(sasa) + ", conv+SD " + fmt(conv_err) +
                        ", SASA+MSE " + fmt(mse_err) + " frames");
  }
  const double mean = sum_sasa / kSeeds;
  o.pass = sasa_wins >= kSasaWinsNeeded && mean < kPathTargetFrames && divergence_wins >= kDivergenceWinsNeeded;
  o.summary = "SASA beats conv " + std::to_string(sasa_wins) + "/5 (need >= 4), mean SASA error " + fmt(mean) +
              " frames (need < 4), SD beats MSE " + std::to_string(divergence_wins) + "/5 (need >= 3)";
  return o;
}

Outcome metrics() {
  const std::vector<double> errs = {0.03, 0.07, 0.15, 0.30};
  const bool hand = accuracy_at_margins(errs).accuracy_pct == std::array<double, 4>{0.0, 25.0, 50.0, 75.0};

  std::mt19937_64 rng(1010);
  AlignmentPath diag;
  for (std::size_t i = 0; i < 40; ++i) diag.points.push_back({i, i, false});
  const auto gt = GroundTruthMap::identity(40, 0.05, 0.05);
  const auto perfect = accuracy_at_margins(alignment_errors(diag, 0.05, 0.05, gt));
  const bool full = perfect.accuracy_pct == std::array<double, 4>{100.0, 100.0, 100.0, 100.0};

  std::normal_distribution<double> noise(0.0, 0.1);
  double worst_asym = 0.0;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> a(20), b(20);
    for (auto& v : a) v = noise(rng);
    for (auto& v : b) v = 1.5 * noise(rng);
    worst_asym = std::max(worst_asym, std::abs(diebold_mariano(a, b).statistic + diebold_mariano(b, a).statistic));
  }
  const std::vector<double> same(12, 0.1);
  const auto degenerate = diebold_mariano(same, same);
  const bool safe = degenerate.degenerate && !degenerate.p_value && std::isfinite(degenerate.statistic);
  return {hand && full && worst_asym <= 1e-12 && safe,
          std::string("hand example ") + (hand ? "exact" : "WRONG") + ", perfect alignment " +
              (full ? "100% x4" : "below 100%") + ", DM asymmetry " + fmt(worst_asym) + ", constant differential " +
              (safe ? "flagged degenerate" : "not handled"),
          {}};
}

// Every file under dir, by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_text_file(e.path());
  }
  return files;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "scoresync_acceptance_determinism";
  fs::remove_all(dir);
  const fs::path in = dir / "in", out = dir / "out";
  fs::create_directories(in);
  fs::create_directories(out);
  auto p = [](const fs::path& x) { return x.string(); };

  save_wav_pcm16(test::sine(440.0, 22050, 1.0), in / "perf.wav");
  {
    std::vector<unsigned char> t;
    for (unsigned char pitch : {60, 64, 67, 72}) {
      test::MidiBuilder::vlq(t, 0);
      t.insert(t.end(), {0x90, pitch, 90});
      test::MidiBuilder::vlq(t, 240);
      t.insert(t.end(), {0x80, pitch, 0});
    }
    t.insert(t.end(), {0x00, 0xff, 0x2f, 0x00});
    const auto bytes = test::MidiBuilder(0, 480).track(t).bytes();
    write_text_file(in / "score.mid", std::string(bytes.begin(), bytes.end()));
  }
  std::mt19937_64 rng(1011);
  save_features_csv(test::random_features(80, rng, 0.05), in / "ref.csv");

  const std::vector<std::vector<std::string>> commands = {
      {"features", "--wav", p(in / "perf.wav"), "--out", p(out / "perf.csv")},
      {"features", "--midi", p(in / "score.mid"), "--hop", "0.0232", "--out", p(out / "score.csv")},
      {"perturb", "--features", p(in / "ref.csv"), "--jumps", "2", "--seed", "7", "--out-prefix", p(out / "pert")},
      {"align", "--perf", p(out / "pert.features.csv"), "--score", p(in / "ref.csv"), "--out", p(out / "classic.csv")},
      {"align", "--perf", p(out / "pert.features.csv"), "--score", p(in / "ref.csv"), "--inflection",
       p(out / "pert.inflections.json"), "--out", p(out / "jump.csv")},
      {"eval", "--alignment", p(out / "jump.csv"), "--gt", p(out / "pert.gt.csv"), "--alignment",
       p(out / "classic.csv"), "--gt", p(out / "pert.gt.csv"), "--out", p(out / "eval.json")},
      {"plot", "--perf", p(out / "pert.features.csv"), "--score", p(in / "ref.csv"), "--alignment",
       p(out / "jump.csv"), "--gt", p(out / "pert.gt.csv"), "--out", p(out / "jump.ppm")},
      {"train", "--task", "path", "--instances", "40", "--epochs", "2", "--grid", "16", "--hidden", "8", "--seed",
       "3", "--out", p(out / "path.json"), "--report", p(out / "path_report.json")},
      {"train", "--task", "inflection", "--instances", "20", "--epochs", "1", "--grid", "40", "--channels", "4",
       "--hidden", "8", "--seed", "3", "--out", p(out / "infl.json")},
      {"gradcheck", "--seed", "2", "--out", p(out / "gradcheck.json")},
  };

  Outcome o;
  o.pass = true;
  std::vector<std::map<std::string, std::string>> first;
  std::vector<std::string> first_stdout;
  for (int round = 0; round < 2; ++round) {
    for (std::size_t i = 0; i < commands.size(); ++i) {
      std::ostringstream so, se;
      const int code = cli::run(commands[i], so, se);
      if (code != 0) {
        o.pass = false;
        o.details.push_back(commands[i][0] + " exited " + std::to_string(code) + ": " + se.str());
      }
      if (round == 0) {
        first_stdout.push_back(so.str());
      } else if (so.str() != first_stdout[i]) {
        o.pass = false;
        o.details.push_back(commands[i][0] + " stdout differs between runs");
      }
    }
    first.push_back(snapshot(out));
  }
  std::size_t compared = 0;
  for (const auto& [name, bytes] : first[0]) {
    const auto it = first[1].find(name);
    if (it == first[1].end() || it->second != bytes) {
      o.pass = false;
      o.details.push_back(name + " differs between runs");
    }
    ++compared;
  }
  if (first[0].size() != first[1].size()) o.pass = false;
  o.summary = std::to_string(commands.size()) + " invocations over all 7 subcommands, " + std::to_string(compared) +
              " output files compared byte for byte";
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "DTW oracle equivalence", dtw_oracle},
      {2, "Jump-DTW oracle equivalence", jump_oracle},
      {3, "Structure recovery", structure_recovery},
      {4, "Soft-DTW hard limit", soft_limit},
      {5, "Divergence axioms", divergence_axioms},
      {6, "Gradient fidelity", gradient_fidelity},
      {7, "Dilation identities", dilation_identities},
      {8, "Toy inflection regressor", inflection_regressor},
      {9, "Toy path regressor", path_regressor},
      {10, "Metrics", metrics},
      {11, "CLI determinism", determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what(), {}};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.summary << '\n';
    for (const auto& d : o.details) std::cout << "    " << d << '\n';
    std::cout.flush();
  }
  return failures == 0 ? 0 : 1;
}
