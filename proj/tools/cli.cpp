#include "cli.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scoresync/alignment_io.h"
#include "scoresync/audio.h"
#include "scoresync/dtw.h"
#include "scoresync/error.h"
#include "scoresync/eval.h"
#include "scoresync/features.h"
#include "scoresync/ground_truth.h"
#include "scoresync/midi.h"
#include "scoresync/neural/gradient_suite.h"
#include "scoresync/neural/models.h"
#include "scoresync/plot.h"
#include "scoresync/structure.h"

namespace scoresync::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kPreferredSampleRate = 22050;

// Options of every subcommand; each invocation parses into a fresh copy.
struct Options {
  std::uint64_t seed = 0;

  // features
  std::string wav, midi;
  int frame_length = 2048;
  int hop_length = 512;
  std::string window = "hann";
  double midi_hop = 0.0232;

  // align / plot
  std::string perf, score, inflection, matrix, alignment_file;
  double perf_hop = 0.0, score_hop = 0.0;
  std::size_t max_side = kMaxPlotSide;

  // perturb
  std::string features, gt, out_prefix;
  int jumps = 1;
  std::size_t min_segment = 10;

  // eval
  std::vector<std::string> alignments, gts;
  bool pooled = false;
  std::string pred_inflections, ref_inflections;
  std::size_t inflection_tolerance = kDefaultInflectionTolerance;

  // train
  std::string task = "inflection";
  std::size_t instances = 500;
  std::optional<std::size_t> epochs, batch, channels, hidden, grid;
  std::optional<double> lr, momentum, weight_decay, lambda, clip, validation_fraction;
  std::vector<std::size_t> dilations;
  std::string attention = "sasa";
  std::string loss = "divergence";
  double noise = 0.05;
  bool no_early_stopping = false;
  bool constant_lr = false;
  std::string report;

  // gradcheck
  bool networks = false;
  std::size_t softdtw_instances = 100;
  bool verbose = false;

  std::string out;
};

struct Context {
  std::string stamp;  // "scoresync <version> seed=<s> <args>"
  std::uint64_t seed = 0;
  std::ostream& out;
  std::ostream& err;
};

std::string tool_name() { return std::string("scoresync ") + SCORESYNC_VERSION; }

std::string join_args(const std::vector<std::string>& args) {
  std::string s;
  for (const auto& a : args) {
    if (!s.empty()) s += ' ';
    s += a;
  }
  return s;
}

json provenance(const Context& ctx) { return {{"tool", tool_name()}, {"invocation", ctx.stamp}, {"seed", ctx.seed}}; }

void write_json(const fs::path& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

int cmd_features(const Options& o, const Context& ctx) {
  FeatureSequence seq;
  if (!o.wav.empty()) {
    const AudioClip clip = load_wav(o.wav);
    if (clip.sample_rate != kPreferredSampleRate) {
      ctx.err << "warning: " << o.wav << " has sample rate " << clip.sample_rate << " Hz (features are tuned for "
              << kPreferredSampleRate << " Hz; no resampling is applied)\n";
    }
    ChromaConfig cfg;
    cfg.frame_length = o.frame_length;
    cfg.hop_length = o.hop_length;
    if (o.window == "hann") {
      cfg.window = WindowKind::hann;
    } else if (o.window == "hamming") {
      cfg.window = WindowKind::hamming;
    } else {
      throw InputError("unknown window '" + o.window + "' (expected hann or hamming)");
    }
    seq = chromagram(clip, cfg);
  } else {
    seq = midi_to_chroma(load_midi(o.midi), o.midi_hop);
  }
  save_features_csv(seq, o.out, ctx.stamp);
  ctx.out << "frames=" << seq.frames() << " bins=" << seq.bins() << " hop_seconds=" << format_double(seq.hop_seconds)
          << " origin=" << to_string(seq.origin) << '\n';
  return kExitOk;
}

int cmd_align(const Options& o, const Context& ctx) {
  const FeatureSequence perf = load_features_csv(o.perf);
  const FeatureSequence score = load_features_csv(o.score);
  SCORESYNC_REQUIRE(perf.bins() == score.bins(), "feature bin counts differ: " + o.perf + " has " +
                                                     std::to_string(perf.bins()) + ", " + o.score + " has " +
                                                     std::to_string(score.bins()));
  const CrossSimilarityMatrix cost = cross_similarity(perf, score);
  const bool structured = !o.inflection.empty();
  AlignmentPath path;
  if (structured) {
    const InflectionPointSet infl = parse_inflections_json(read_text_file(o.inflection));
    infl.validate(cost.rows(), cost.cols());
    path = jump_dtw_align(cost, infl);
  } else {
    path = dtw_align(cost);
  }
  save_alignment_csv(path, perf.hop_seconds, score.hop_seconds, structured, o.out, ctx.stamp);
  const auto jumps = std::count_if(path.points.begin(), path.points.end(), [](const PathPoint& p) { return p.jump; });
  ctx.out << "cost=" << format_double(path.total_cost) << " points=" << path.points.size() << " jumps=" << jumps
          << '\n';
  return kExitOk;
}

int cmd_perturb(const Options& o, const Context& ctx) {
  const FeatureSequence seq = load_features_csv(o.features);
  const GroundTruthMap gt = o.gt.empty() ? GroundTruthMap::identity(seq.frames(), seq.hop_seconds, seq.hop_seconds)
                                         : load_ground_truth_csv(o.gt);
  PerturbOptions popt;
  popt.min_segment = o.min_segment;
  popt.score_hop_seconds = o.score_hop;
  const Perturbation p = synth_perturb(seq, gt, o.jumps, ctx.seed, popt);

  const std::string prefix = o.out_prefix;
  save_features_csv(p.features, prefix + ".features.csv", ctx.stamp);
  save_ground_truth_csv(p.ground_truth, prefix + ".gt.csv", ctx.stamp);
  json infl = json::parse(format_inflections_json(p.inflections));
  infl.update(provenance(ctx));
  write_json(prefix + ".inflections.json", infl);
  json log = json::parse(format_splice_log_json(p, ctx.seed));
  log.update(provenance(ctx));
  write_json(prefix + ".splices.json", log);
  ctx.out << "frames=" << p.features.frames() << " jumps=" << p.splices.size()
          << " inflections=" << p.inflections.size() << '\n';
  return kExitOk;
}

json accuracy_json(const AccuracyReport& r) {
  json acc = json::object();
  for (std::size_t k = 0; k < kThresholdsMs.size(); ++k) {
    acc[std::to_string(static_cast<int>(kThresholdsMs[k])) + "ms"] = r.accuracy_pct[k];
  }
  return {{"n_events", r.n_events}, {"accuracy_pct", acc}};
}

int cmd_eval(const Options& o, const Context& ctx) {
  SCORESYNC_REQUIRE(o.alignments.size() == o.gts.size(),
                    "--alignment and --gt must be given the same number of times (" +
                        std::to_string(o.alignments.size()) + " vs " + std::to_string(o.gts.size()) + ")");
  std::vector<AccuracyReport> reports;
  json pieces = json::array();
  for (std::size_t i = 0; i < o.alignments.size(); ++i) {
    const AlignmentTable table = load_alignment_csv(o.alignments[i]);
    const GroundTruthMap gt = load_ground_truth_csv(o.gts[i]);
    const auto errors = alignment_errors(table.timed, gt);
    const AccuracyReport r = accuracy_at_margins(errors);
    reports.push_back(r);
    double mae = 0.0;
    for (double e : errors) mae += std::abs(e);
    json piece = accuracy_json(r);
    piece["alignment"] = o.alignments[i];
    piece["gt"] = o.gts[i];
    piece["mean_abs_error_s"] = errors.empty() ? 0.0 : mae / static_cast<double>(errors.size());
    piece["signed_errors_s"] = errors;
    pieces.push_back(piece);
  }

  json doc = provenance(ctx);
  doc["thresholds_ms"] = kThresholdsMs;
  doc["pieces"] = pieces;
  const AccuracyReport agg = aggregate_reports(reports, o.pooled);
  doc["aggregate"] = accuracy_json(agg);
  doc["aggregate"]["mode"] = o.pooled ? "pooled" : "per_piece";

  if (!o.pred_inflections.empty() || !o.ref_inflections.empty()) {
    SCORESYNC_REQUIRE(!o.pred_inflections.empty() && !o.ref_inflections.empty(),
                      "--predicted-inflections and --reference-inflections go together");
    const auto pred = parse_inflections_json(read_text_file(o.pred_inflections));
    const auto ref = parse_inflections_json(read_text_file(o.ref_inflections));
    doc["inflection_accuracy"] = {{"tolerance_frames", o.inflection_tolerance},
                                  {"accuracy", inflection_accuracy(pred, ref, o.inflection_tolerance)}};
  }

  if (!o.out.empty()) write_json(o.out, doc);
  ctx.out << "events=" << agg.n_events;
  for (std::size_t k = 0; k < kThresholdsMs.size(); ++k) {
    ctx.out << " acc" << static_cast<int>(kThresholdsMs[k]) << "ms=" << format_double(agg.accuracy_pct[k]);
  }
  ctx.out << '\n';
  if (o.out.empty()) ctx.out << doc.dump(2) << '\n';
  return kExitOk;
}

int cmd_train(const Options& o, const Context& ctx) {
  using namespace neural;
  const ToyTask task = parse_task(o.task);
  ToyConfig cfg = default_toy_config(task);
  cfg.seed = ctx.seed;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.batch) cfg.batch_size = *o.batch;
  if (o.channels) cfg.channels = *o.channels;
  if (o.hidden) cfg.hidden = *o.hidden;
  if (o.grid) cfg.grid = *o.grid;
  if (o.lr) cfg.learning_rate = *o.lr;
  if (o.momentum) cfg.momentum = *o.momentum;
  if (o.weight_decay) cfg.weight_decay = *o.weight_decay;
  if (o.lambda) cfg.lambda = *o.lambda;
  if (o.clip) cfg.clip_norm = *o.clip;
  if (o.validation_fraction) cfg.validation_fraction = *o.validation_fraction;
  if (!o.dilations.empty()) cfg.dilations = o.dilations;
  if (o.no_early_stopping) cfg.early_stopping = false;
  if (o.constant_lr) cfg.cosine_decay = false;
  if (o.attention == "sasa") {
    cfg.use_sasa = true;
  } else if (o.attention == "conv") {
    cfg.use_sasa = false;
  } else {
    throw InputError("unknown --attention '" + o.attention + "' (expected sasa or conv)");
  }
  cfg.loss = parse_path_loss(o.loss);

  SyntheticOptions data_opt;
  data_opt.grid = cfg.grid;
  data_opt.noise = o.noise;
  data_opt.max_points = cfg.max_points;
  const auto data = task == ToyTask::inflection ? make_inflection_dataset(o.instances, ctx.seed, data_opt)
                                                : make_path_dataset(o.instances, ctx.seed, data_opt);
  ToyModel model = task == ToyTask::inflection ? train_inflection_regressor(data, cfg) : train_path_regressor(data, cfg);

  const auto& r = model.report;
  for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
    ctx.out << "epoch " << e + 1 << " train_loss=" << format_double(r.train_loss[e])
            << " validation_loss=" << format_double(r.validation_loss[e + 1])
            << " validation_error=" << format_double(r.validation_error[e + 1]) << '\n';
  }
  ctx.out << "final validation_loss=" << format_double(r.validation_loss[r.best_epoch])
          << " validation_error=" << format_double(r.final_validation_error) << " best_epoch=" << r.best_epoch << '\n';

  if (!o.out.empty()) save_toy_model(model, o.out, provenance(ctx));
  if (!o.report.empty()) {
    json doc = provenance(ctx);
    doc["task"] = std::string(to_string(task));
    doc["instances"] = o.instances;
    doc["noise"] = o.noise;
    doc["config"] = cfg.to_json();
    doc["report"] = r.to_json();
    write_json(o.report, doc);
  }
  return kExitOk;
}

int cmd_gradcheck(const Options& o, const Context& ctx) {
  neural::SuiteOptions sopt;
  sopt.seed = ctx.seed;
  sopt.networks = o.networks;
  sopt.softdtw_instances = o.softdtw_instances;
  const auto cases = neural::run_gradient_suite(sopt);

  double worst = 0.0;
  bool pass = true;
  json doc = provenance(ctx);
  doc["cases"] = json::array();
  for (const auto& c : cases) {
    worst = std::max(worst, c.max_rel_err);
    pass = pass && c.pass();
    doc["cases"].push_back(neural::to_json(c));
    ctx.out << c.name << " instances=" << c.instances << " checked=" << c.checked
            << " skipped_kinks=" << c.skipped_kinks << " max_rel_err=" << format_double(c.max_rel_err)
            << " tolerance=" << format_double(c.tolerance) << (c.pass() ? " PASS" : " FAIL") << '\n';
    if (o.verbose) {
      for (std::size_t i = 0; i < c.instance_max_rel_err.size(); ++i) {
        ctx.out << "  " << c.name << '[' << i << "] max_rel_err=" << format_double(c.instance_max_rel_err[i]) << '\n';
      }
    }
  }
  doc["max_rel_err"] = worst;
  doc["pass"] = pass;
  if (!o.out.empty()) write_json(o.out, doc);
  ctx.out << (pass ? "PASS" : "FAIL") << " max_rel_err=" << format_double(worst) << '\n';
  return pass ? kExitOk : kExitInternal;
}

AlignmentPath ground_truth_path(const GroundTruthMap& gt, double perf_hop, double score_hop) {
  SCORESYNC_REQUIRE(perf_hop > 0.0 && score_hop > 0.0, "plotting ground truth needs positive frame hops");
  AlignmentPath path;
  for (const auto& e : gt.events) {
    const double pf = std::round(e.perf_time_s / perf_hop);
    const double sf = std::round(e.score_time_s / score_hop);
    SCORESYNC_ASSERT(pf >= 0.0 && sf >= 0.0, "ground truth event maps to a negative frame");
    path.points.push_back({static_cast<std::size_t>(pf), static_cast<std::size_t>(sf), false});
  }
  return path;
}

int cmd_plot(const Options& o, const Context& ctx) {
  Matrix cost;
  double perf_hop = o.perf_hop, score_hop = o.score_hop;
  if (!o.matrix.empty()) {
    cost = load_matrix_csv(o.matrix);
  } else {
    SCORESYNC_REQUIRE(!o.perf.empty() && !o.score.empty(), "plot needs --matrix or both --perf and --score");
    const auto perf = load_features_csv(o.perf);
    const auto score = load_features_csv(o.score);
    cost = cross_similarity(perf, score);
    if (perf_hop <= 0.0) perf_hop = perf.hop_seconds;
    if (score_hop <= 0.0) score_hop = score.hop_seconds;
  }
  const AlignmentTable table = load_alignment_csv(o.alignment_file);
  std::optional<AlignmentPath> reference;
  if (!o.gt.empty()) reference = ground_truth_path(load_ground_truth_csv(o.gt), perf_hop, score_hop);
  const RgbImage img =
      render_alignment_plot(cost, &table.path, reference ? &*reference : nullptr, o.max_side);
  write_text_file(o.out, format_ppm(img, ctx.stamp));
  ctx.out << "width=" << img.width << " height=" << img.height
          << " scale=" << plot_scale_factor(cost.rows(), cost.cols(), o.max_side) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_manifest(const std::string& manifest, std::size_t jobs, std::ostream& out, std::ostream& err) {
  std::vector<std::vector<std::string>> argvs;
  {
    std::istringstream lines(read_text_file(manifest));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        argvs.push_back(manifest_job_argv(line));
      } catch (const InputError& e) {
        throw InputError(manifest + " line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  SCORESYNC_REQUIRE(!argvs.empty(), "manifest " + manifest + " lists no jobs");

  std::vector<std::string> outs(argvs.size()), errs(argvs.size());
  std::vector<int> codes(argvs.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < argvs.size(); i = next++) {
      std::ostringstream o, e;
      codes[i] = run(argvs[i], o, e);
      outs[i] = o.str();
      errs[i] = e.str();
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, argvs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int worst = kExitOk;
  for (std::size_t i = 0; i < argvs.size(); ++i) {
    out << "[job " << i + 1 << "] " << join_args(argvs[i]) << '\n' << outs[i];
    err << errs[i];
    out << "[job " << i + 1 << "] exit=" << codes[i] << '\n';
    worst = std::max(worst, codes[i]);
  }
  return worst;
}

template <class F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace

std::vector<std::string> manifest_job_argv(const std::string& line) {
  json job;
  try {
    job = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed job JSON: ") + e.what());
  }
  SCORESYNC_REQUIRE(job.is_object(), "each job must be a JSON object");
  std::vector<std::string> argv;
  if (job.contains("argv")) {
    SCORESYNC_REQUIRE(job["argv"].is_array(), "\"argv\" must be an array of strings");
    for (const auto& a : job["argv"]) {
      SCORESYNC_REQUIRE(a.is_string(), "\"argv\" must be an array of strings");
      argv.push_back(a.get<std::string>());
    }
  } else {
    SCORESYNC_REQUIRE(job.contains("command") && job["command"].is_string(),
                      "job needs \"argv\" or a \"command\" string");
    argv.push_back(job["command"].get<std::string>());
    const json args = job.value("args", json::object());
    SCORESYNC_REQUIRE(args.is_object(), "\"args\" must be an object");
    auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    for (const auto& [key, value] : args.items()) {
      const std::string flag = "--" + key;
      if (value.is_boolean()) {
        if (value.get<bool>()) argv.push_back(flag);
      } else if (value.is_array()) {
        for (const auto& v : value) {
          argv.push_back(flag);
          argv.push_back(scalar(v));
        }
      } else {
        argv.push_back(flag);
        argv.push_back(scalar(value));
      }
    }
  }
  SCORESYNC_REQUIRE(!argv.empty(), "job has an empty argument list");
  SCORESYNC_REQUIRE(std::find(argv.begin(), argv.end(), "--manifest") == argv.end(), "jobs cannot nest manifests");
  return argv;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"scoresync: performance-to-score alignment toolkit", "scoresync"};
  app.set_version_flag("--version", tool_name());
  std::string manifest;
  std::size_t jobs = 1;
  app.add_option("--manifest", manifest, "Newline-delimited JSON job file; each line is one invocation");
  app.add_option("--jobs", jobs, "Parallel manifest jobs")->check(CLI::PositiveNumber);

  auto seed_flag = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Random seed (recorded in outputs)"); };

  auto* features = app.add_subcommand("features", "Extract chroma features from a WAV or MIDI file");
  auto* wav = features->add_option("--wav", o.wav, "PCM16 or float32 WAV input");
  auto* mid = features->add_option("--midi", o.midi, "Standard MIDI file input");
  wav->excludes(mid);
  features->add_option("--frame-length", o.frame_length, "STFT frame length in samples")->capture_default_str();
  features->add_option("--hop-length", o.hop_length, "STFT hop in samples")->capture_default_str();
  features->add_option("--window", o.window, "hann or hamming")->capture_default_str();
  features->add_option("--hop", o.midi_hop, "Frame hop in seconds for MIDI input")->capture_default_str();
  features->add_option("--out", o.out, "Feature CSV output")->required();
  seed_flag(features);

  auto* align = app.add_subcommand("align", "Align two feature files with DTW or jump DTW");
  align->add_option("--perf", o.perf, "Performance feature CSV")->required();
  align->add_option("--score", o.score, "Score feature CSV")->required();
  align->add_option("--inflection", o.inflection, "Inflection point JSON; enables jump DTW");
  align->add_option("--out", o.out, "Alignment CSV output")->required();
  seed_flag(align);

  auto* perturb = app.add_subcommand("perturb", "Split and rejoin a feature sequence with structural jumps");
  perturb->add_option("--features", o.features, "Feature CSV to perturb")->required();
  perturb->add_option("--gt", o.gt, "Ground-truth CSV (default: identity at the feature hop)");
  perturb->add_option("--jumps", o.jumps, "Number of jumps, 1 to 4")->required();
  perturb->add_option("--min-segment", o.min_segment, "Shortest segment in frames")->capture_default_str();
  perturb->add_option("--score-hop", o.score_hop, "Score hop in seconds when it differs from the features");
  perturb->add_option("--out-prefix", o.out_prefix,
                      "Writes <prefix>.features.csv, .gt.csv, .inflections.json, .splices.json")
      ->required();
  seed_flag(perturb);

  auto* eval = app.add_subcommand("eval", "Score alignments against ground truth");
  eval->add_option("--alignment", o.alignments, "Alignment CSV (repeat for several pieces)")->required();
  eval->add_option("--gt", o.gts, "Ground-truth CSV, one per --alignment")->required();
  eval->add_flag("--pooled", o.pooled, "Pool events across pieces instead of averaging per piece");
  eval->add_option("--predicted-inflections", o.pred_inflections, "Predicted inflection JSON");
  eval->add_option("--reference-inflections", o.ref_inflections, "Reference inflection JSON");
  eval->add_option("--inflection-tolerance", o.inflection_tolerance, "Frames")->capture_default_str();
  eval->add_option("--out", o.out, "Report JSON (printed to stdout when omitted)");
  seed_flag(eval);

  auto* train = app.add_subcommand("train", "Train a toy regressor on synthetic data");
  train->add_option("--task", o.task, "inflection or path")->capture_default_str();
  train->add_option("--instances", o.instances, "Synthetic instances")->capture_default_str();
  train->add_option("--epochs", o.epochs, "Training epochs");
  train->add_option("--batch", o.batch, "Minibatch size");
  train->add_option("--channels", o.channels, "Convolution channels");
  train->add_option("--hidden", o.hidden, "Dense hidden units");
  train->add_option("--grid", o.grid, "Input grid side");
  train->add_option("--lr", o.lr, "Learning rate");
  train->add_option("--momentum", o.momentum, "SGD momentum");
  train->add_option("--weight-decay", o.weight_decay, "L2 weight decay");
  train->add_option("--lambda", o.lambda, "soft-DTW smoothing");
  train->add_option("--clip", o.clip, "Global gradient-norm clip (0 disables)");
  train->add_option("--validation-fraction", o.validation_fraction, "Held-out share");
  train->add_option("--dilations", o.dilations, "Inflection model dilations, e.g. 1,2,3")->delimiter(',');
  train->add_option("--attention", o.attention, "Path model middle blocks: sasa or conv")->capture_default_str();
  train->add_option("--loss", o.loss, "Path loss: divergence or mse")->capture_default_str();
  train->add_option("--noise", o.noise, "Feature noise of the synthetic data")->capture_default_str();
  train->add_flag("--no-early-stopping", o.no_early_stopping, "Keep the last epoch instead of the best");
  train->add_flag("--constant-lr", o.constant_lr, "Disable cosine learning-rate decay");
  train->add_option("--out", o.out, "Model manifest (.json; weights go to a sibling .bin)");
  train->add_option("--report", o.report, "Training report JSON");
  seed_flag(train);

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  gradcheck->add_flag("--networks", o.networks, "Also check both toy networks end to end");
  gradcheck->add_option("--softdtw-instances", o.softdtw_instances, "Random soft-DTW instances")
      ->capture_default_str();
  gradcheck->add_flag("--verbose", o.verbose, "Print every instance");
  gradcheck->add_option("--out", o.out, "Report JSON");
  seed_flag(gradcheck);

  auto* plot = app.add_subcommand("plot", "Render a cost matrix with alignment paths as a PPM image");
  plot->add_option("--matrix", o.matrix, "Cost matrix CSV (rows = performance frames)");
  plot->add_option("--perf", o.perf, "Performance features; with --score, computes the matrix");
  plot->add_option("--score", o.score, "Score features");
  plot->add_option("--alignment", o.alignment_file, "Predicted alignment CSV (red)")->required();
  plot->add_option("--gt", o.gt, "Ground-truth CSV (blue)");
  plot->add_option("--perf-hop", o.perf_hop, "Performance hop in seconds for --gt with --matrix");
  plot->add_option("--score-hop", o.score_hop, "Score hop in seconds for --gt with --matrix");
  plot->add_option("--max-side", o.max_side, "Longest image side")->capture_default_str()->check(CLI::PositiveNumber);
  plot->add_option("--out", o.out, "PPM output")->required();
  seed_flag(plot);

  app.require_subcommand(0, 1);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << tool_name() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // A subcommand's --help surfaces as CallForHelp from the subcommand.
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      const auto subs = app.get_subcommands();
      out << (subs.empty() ? app.help() : subs.front()->help());
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  return guarded(
      [&]() -> int {
        if (!manifest.empty()) {
          SCORESYNC_REQUIRE(app.get_subcommands().empty(), "--manifest cannot be combined with a subcommand");
          return run_manifest(manifest, jobs, out, err);
        }
        SCORESYNC_REQUIRE(!app.get_subcommands().empty(),
                          "a subcommand is required (features, align, perturb, train, eval, gradcheck, plot)");
        Context ctx{tool_name() + " seed=" + std::to_string(o.seed) + " " + join_args(args), o.seed, out, err};
        if (features->parsed()) {
          SCORESYNC_REQUIRE(!o.wav.empty() || !o.midi.empty(), "features needs --wav or --midi");
          return cmd_features(o, ctx);
        }
        if (align->parsed()) return cmd_align(o, ctx);
        if (perturb->parsed()) return cmd_perturb(o, ctx);
        if (eval->parsed()) return cmd_eval(o, ctx);
        if (train->parsed()) return cmd_train(o, ctx);
        if (gradcheck->parsed()) return cmd_gradcheck(o, ctx);
        return cmd_plot(o, ctx);
      },
      err);
}

}  // namespace scoresync::cli
