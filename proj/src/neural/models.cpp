#include "scoresync/neural/models.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "scoresync/error.h"
#include "scoresync/ground_truth.h"
#include "scoresync/neural/loss.h"
#include "scoresync/softdtw.h"

namespace scoresync::neural {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t item_seed(std::uint64_t seed, std::size_t k) { return splitmix64(splitmix64(seed) + k); }

// Source index sampled by output cell r when n cells are resampled to grid.
std::size_t resample_index(std::size_t r, std::size_t n, std::size_t grid) {
  const auto idx = static_cast<std::size_t>((static_cast<double>(r) + 0.5) * static_cast<double>(n) /
                                            static_cast<double>(grid));
  return std::min(idx, n - 1);
}

// Frame coordinate c of an n-frame axis expressed on the grid.
double to_grid(double c, std::size_t n, std::size_t grid) {
  return (c + 0.5) * static_cast<double>(grid) / static_cast<double>(n) - 0.5;
}

void renormalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double n = 0.0;
    for (double v : row) n += v * v;
    n = std::sqrt(n);
    if (n > 0.0) {
      for (double& v : row) v /= n;
    }
  }
}

FeatureSequence add_noise(FeatureSequence seq, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return seq;
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : seq.data.data()) v = std::max(0.0, v + noise(rng));
  renormalize_rows(seq.data);
  return seq;
}

double index_scale(const ToyConfig& c) { return c.index_scale > 0.0 ? c.index_scale : static_cast<double>(c.grid); }

}  // namespace

Tensor matrix_to_input(const CrossSimilarityMatrix& cost, std::size_t grid) {
  SCORESYNC_REQUIRE(!cost.empty(), "cannot resample an empty cost matrix");
  SCORESYNC_REQUIRE(grid >= 8 && grid % 8 == 0, "toy grid must be a positive multiple of 8");
  Tensor x({1, grid, grid});
  for (std::size_t r = 0; r < grid; ++r) {
    const std::size_t sr = resample_index(r, cost.rows(), grid);
    for (std::size_t c = 0; c < grid; ++c) x.at(0, r, c) = cost(sr, resample_index(c, cost.cols(), grid));
  }
  SCORESYNC_REQUIRE(x.all_finite(), "cost matrix contains non-finite values");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.values().begin(), x.values().end(), 0.0) / n;
  double var = 0.0;
  for (double v : x.values()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  // Negated so that well-matching cells are the maxima that pooling keeps.
  for (double& v : x.values()) v = sd > 0.0 ? (mean - v) / sd : 0.0;
  return x;
}

RegressionExample inflection_example(const CrossSimilarityMatrix& cost, const InflectionPointSet& points,
                                     std::size_t max_points, std::size_t grid) {
  points.validate(cost.rows(), cost.cols());
  SCORESYNC_REQUIRE(points.size() <= max_points, "instance has " + std::to_string(points.size()) +
                                                     " inflection points; the model emits at most " +
                                                     std::to_string(max_points));
  RegressionExample ex{matrix_to_input(cost, grid), std::vector<double>(2 * max_points, kSentinelGridMultiple)};
  const double g = static_cast<double>(grid);
  for (std::size_t k = 0; k < points.size(); ++k) {
    ex.target[2 * k] = to_grid(static_cast<double>(points.points[k].perf), cost.rows(), grid) / g;
    ex.target[2 * k + 1] = to_grid(static_cast<double>(points.points[k].score), cost.cols(), grid) / g;
  }
  return ex;
}

RegressionExample path_example(const CrossSimilarityMatrix& cost, const std::vector<std::size_t>& score_index,
                               std::size_t grid) {
  SCORESYNC_REQUIRE(score_index.size() == cost.rows(), "path target needs one score index per performance frame");
  RegressionExample ex{matrix_to_input(cost, grid), std::vector<double>(grid)};
  for (std::size_t r = 0; r < grid; ++r) {
    const std::size_t s = score_index[resample_index(r, cost.rows(), grid)];
    SCORESYNC_REQUIRE(s < cost.cols(), "path target index out of range");
    ex.target[r] = to_grid(static_cast<double>(s), cost.cols(), grid) / static_cast<double>(grid);
  }
  return ex;
}

FeatureSequence random_chroma_sequence(std::size_t frames, std::mt19937_64& rng, double hop_seconds) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureSequence seq;
  seq.data = Matrix(frames, kChromaBins);
  seq.hop_seconds = hop_seconds;
  // Cubing concentrates energy on a few pitch classes per frame.
  for (double& v : seq.data.data()) v = std::pow(u(rng), 3.0);
  renormalize_rows(seq.data);
  return seq;
}

std::vector<RegressionExample> make_inflection_dataset(std::size_t n, std::uint64_t seed,
                                                       const SyntheticOptions& options) {
  SCORESYNC_REQUIRE(2 * options.max_points >= 4, "inflection dataset needs room for two jumps");
  std::vector<RegressionExample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::mt19937_64 rng(item_seed(seed, k));
    const auto score = random_chroma_sequence(options.grid, rng);
    const auto gt = GroundTruthMap::identity(options.grid, score.hop_seconds, score.hop_seconds);
    const int jumps = std::uniform_int_distribution<int>(1, 2)(rng);
    const auto p = synth_perturb(score, gt, jumps, rng());
    const auto perf = add_noise(p.features, options.noise, rng);
    out.push_back(inflection_example(cross_similarity(perf, score), p.inflections, options.max_points, options.grid));
  }
  return out;
}

std::vector<RegressionExample> make_path_dataset(std::size_t n, std::uint64_t seed, const SyntheticOptions& options) {
  std::vector<RegressionExample> out;
  out.reserve(n);
  const std::size_t grid = options.grid;
  for (std::size_t k = 0; k < n; ++k) {
    std::mt19937_64 rng(item_seed(seed, k));
    const auto score = random_chroma_sequence(grid, rng);
    const auto perf_len = std::uniform_int_distribution<std::size_t>(3 * grid / 4, 3 * grid / 2)(rng);

    // Four tempo segments with slopes in [1/2, 2], normalized to span the score.
    constexpr int kSegments = 4;
    std::uniform_real_distribution<double> log_tempo(-std::log(2.0), std::log(2.0));
    std::array<double, kSegments + 1> knot{};
    for (int s = 1; s <= kSegments; ++s) knot[s] = knot[s - 1] + std::exp(log_tempo(rng));
    std::vector<std::size_t> index(perf_len);
    for (std::size_t t = 0; t < perf_len; ++t) {
      const double u = (static_cast<double>(t) + 0.5) / static_cast<double>(perf_len) * kSegments;
      const int s = std::min(kSegments - 1, static_cast<int>(u));
      const double pos = (knot[s] + (u - s) * (knot[s + 1] - knot[s])) / knot[kSegments];
      index[t] = std::min(grid - 1, static_cast<std::size_t>(pos * static_cast<double>(grid)));
    }

    FeatureSequence perf;
    perf.hop_seconds = score.hop_seconds;
    perf.data = Matrix(perf_len, kChromaBins);
    for (std::size_t t = 0; t < perf_len; ++t) {
      std::copy(score.data.row(index[t]).begin(), score.data.row(index[t]).end(), perf.data.row(t).begin());
    }
    perf = add_noise(std::move(perf), options.noise, rng);
    out.push_back(path_example(cross_similarity(perf, score), index, grid));
  }
  return out;
}

std::string_view to_string(ToyTask task) { return task == ToyTask::inflection ? "inflection" : "path"; }

ToyTask parse_task(std::string_view text) {
  if (text == "inflection") return ToyTask::inflection;
  if (text == "path") return ToyTask::path;
  throw InputError("unknown task \"" + std::string(text) + "\" (expected inflection or path)");
}

std::string_view to_string(PathLoss loss) { return loss == PathLoss::divergence ? "divergence" : "mse"; }

PathLoss parse_path_loss(std::string_view text) {
  if (text == "divergence") return PathLoss::divergence;
  if (text == "mse") return PathLoss::mse;
  throw InputError("unknown path loss \"" + std::string(text) + "\" (expected divergence or mse)");
}

nlohmann::json ToyConfig::to_json() const {
  return {{"seed", seed},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"weight_decay", weight_decay},
          {"cosine_decay", cosine_decay},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"validation_fraction", validation_fraction},
          {"clip_norm", clip_norm},
          {"early_stopping", early_stopping},
          {"channels", channels},
          {"hidden", hidden},
          {"grid", grid},
          {"dilations", dilations},
          {"max_points", max_points},
          {"padding_value", kSentinelGridMultiple * static_cast<double>(grid)},
          {"use_sasa", use_sasa},
          {"sasa_extent", sasa_extent},
          {"loss", std::string(to_string(loss))},
          {"lambda", lambda},
          {"index_scale", index_scale}};
}

ToyConfig ToyConfig::from_json(const nlohmann::json& j) {
  ToyConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.cosine_decay = j.value("cosine_decay", c.cosine_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.early_stopping = j.value("early_stopping", c.early_stopping);
    c.channels = j.value("channels", c.channels);
    c.hidden = j.value("hidden", c.hidden);
    c.grid = j.value("grid", c.grid);
    c.dilations = j.value("dilations", c.dilations);
    c.max_points = j.value("max_points", c.max_points);
    c.use_sasa = j.value("use_sasa", c.use_sasa);
    c.sasa_extent = j.value("sasa_extent", c.sasa_extent);
    c.loss = parse_path_loss(j.value("loss", std::string(to_string(c.loss))));
    c.lambda = j.value("lambda", c.lambda);
    c.index_scale = j.value("index_scale", c.index_scale);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model config: ") + e.what());
  }
  return c;
}

ToyConfig default_toy_config(ToyTask task) {
  ToyConfig c;
  if (task == ToyTask::inflection) c.learning_rate = 0.03;
  return c;
}

// ---------------------------------------------------------------------------
// Architectures

namespace {

void check_config(const ToyConfig& c) {
  SCORESYNC_REQUIRE(c.grid >= 8 && c.grid % 8 == 0, "toy grid must be a positive multiple of 8");
  SCORESYNC_REQUIRE(c.channels >= 1 && c.channels <= 16, "toy models use 1 to 16 channels");
  SCORESYNC_REQUIRE(c.hidden >= 1, "hidden width must be >= 1");
  SCORESYNC_REQUIRE(c.batch_size >= 1, "batch size must be >= 1");
  SCORESYNC_REQUIRE(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), "learning rate must be > 0");
  SCORESYNC_REQUIRE(c.momentum >= 0.0 && c.momentum < 1.0, "momentum must lie in [0, 1)");
  SCORESYNC_REQUIRE(c.validation_fraction > 0.0 && c.validation_fraction < 1.0,
                    "validation fraction must lie in (0, 1)");
  SCORESYNC_REQUIRE(c.weight_decay >= 0.0, "weight decay must be >= 0");
  SCORESYNC_REQUIRE(c.clip_norm >= 0.0, "clip norm must be >= 0");
  SCORESYNC_REQUIRE(c.lambda > 0.0, "soft-DTW lambda must be > 0 for training");
}

template <class L, class... Args>
std::size_t add_init(Network& net, std::mt19937_64& rng, Args&&... args) {
  auto layer = std::make_unique<L>(std::forward<Args>(args)...);
  layer->init(rng);
  return net.add(std::move(layer));
}

}  // namespace

Network build_inflection_model(const ToyConfig& c, std::mt19937_64& rng) {
  check_config(c);
  SCORESYNC_REQUIRE(c.dilations.size() == 3, "the inflection model has exactly three convolution stages");
  SCORESYNC_REQUIRE(c.max_points >= 1, "max_points must be >= 1");
  Network net;
  std::size_t in = 1;
  for (std::size_t d : c.dilations) {
    SCORESYNC_REQUIRE(d >= 1, "dilation must be >= 1");
    // Padding d keeps the extent for a 3-tap kernel at dilation d.
    net.add(std::make_unique<PadLayer>(d));
    add_init<Conv2dLayer>(net, rng, in, c.channels, std::size_t{3}, d);
    net.add(std::make_unique<ReluLayer>());
    net.add(std::make_unique<MaxPoolLayer>());
    in = c.channels;
  }
  const std::size_t side = c.grid / 8;
  net.add(std::make_unique<FlattenLayer>());
  add_init<DenseLayer>(net, rng, c.channels * side * side, c.hidden);
  net.add(std::make_unique<ReluLayer>());
  add_init<DenseLayer>(net, rng, c.hidden, 2 * c.max_points);
  return net;
}

Network build_path_model(const ToyConfig& c, std::mt19937_64& rng) {
  check_config(c);
  SCORESYNC_REQUIRE(c.channels % 8 == 0, "the path model needs channels divisible by 8 for four attention heads");
  Network net;
  std::size_t last_pool = 0;
  std::size_t in = 1;
  for (int block = 0; block < 2; ++block) {
    net.add(std::make_unique<PadLayer>(1));
    add_init<Conv2dLayer>(net, rng, in, c.channels, std::size_t{3}, std::size_t{1});
    net.add(std::make_unique<ReluLayer>());
    last_pool = net.add(std::make_unique<MaxPoolLayer>());
    in = c.channels;
  }
  net.add(std::make_unique<MaxUnpoolLayer>(last_pool));
  for (int block = 0; block < 2; ++block) {
    if (c.use_sasa) {
      add_init<SasaLayer>(net, rng, c.channels, c.sasa_extent);
    } else {
      net.add(std::make_unique<PadLayer>(c.sasa_extent));
      add_init<Conv2dLayer>(net, rng, c.channels, c.channels, 2 * c.sasa_extent + 1, std::size_t{1});
    }
    net.add(std::make_unique<ReluLayer>());
  }
  const std::size_t side = c.grid / 2;
  net.add(std::make_unique<FlattenLayer>());
  add_init<DenseLayer>(net, rng, c.channels * side * side, c.hidden);
  net.add(std::make_unique<ReluLayer>());
  add_init<DenseLayer>(net, rng, c.hidden, c.grid);
  return net;
}

// ---------------------------------------------------------------------------
// Losses and metrics

double task_loss(ToyTask task, const ToyConfig& config, const Tensor& pred, const std::vector<double>& target,
                 Tensor* grad) {
  SCORESYNC_REQUIRE(pred.size() == target.size(), "prediction has " + std::to_string(pred.size()) +
                                                      " values, target " + std::to_string(target.size()));
  if (task == ToyTask::inflection) {
    if (grad) *grad = Tensor(pred.shape(), mse_padded_loss_grad(pred.values(), target));
    return mse_padded_loss(pred.values(), target, kSentinelGridMultiple);
  }
  const double s = index_scale(config);
  const double n = static_cast<double>(pred.size());
  std::vector<double> a(pred.size()), b(target.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = s * pred[i];
    b[i] = s * target[i];
  }
  double loss = 0.0;
  std::vector<double> g;
  if (config.loss == PathLoss::divergence) {
    loss = soft_dtw_divergence(a, b, config.lambda) / n;
    if (grad) g = soft_dtw_divergence_grad(a, b, config.lambda);
  } else {
    loss = mse_padded_loss(a, b, kSentinelGridMultiple * s);
    if (grad) {
      g = mse_padded_loss_grad(a, b);
      for (double& v : g) v *= n;
    }
  }
  if (grad) {
    *grad = Tensor(pred.shape());
    for (std::size_t i = 0; i < g.size(); ++i) (*grad)[i] = g[i] * s / n;
  }
  return loss;
}

std::pair<double, std::size_t> inflection_error(const Tensor& pred, const std::vector<double>& target,
                                                std::size_t grid) {
  const double g = static_cast<double>(grid);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == kSentinelGridMultiple) continue;
    const double p = std::clamp(pred[i] * g, 0.0, g - 1.0);
    sum += std::abs(p - target[i] * g);
    ++count;
  }
  return {sum, count};
}

std::pair<double, std::size_t> path_error(const Tensor& pred, const std::vector<double>& target, std::size_t grid) {
  const double g = static_cast<double>(grid);
  double sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) sum += std::abs(pred[i] - target[i]) * g;
  return {sum, target.size()};
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Evaluation {
  double loss = 0.0;
  double error = 0.0;
};

Evaluation evaluate(ToyTask task, const ToyConfig& config, const Network& net,
                    const std::vector<RegressionExample>& data, std::size_t begin, std::size_t end) {
  double loss = 0.0, err = 0.0;
  std::size_t count = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const Tensor y = net.predict(data[i].input);
    loss += task_loss(task, config, y, data[i].target, nullptr);
    const auto [s, c] = task == ToyTask::inflection ? inflection_error(y, data[i].target, config.grid)
                                                    : path_error(y, data[i].target, config.grid);
    err += s;
    count += c;
  }
  return {loss / static_cast<double>(end - begin), count ? err / static_cast<double>(count) : 0.0};
}

ToyModel train(ToyTask task, const std::vector<RegressionExample>& data, const ToyConfig& config) {
  check_config(config);
  SCORESYNC_REQUIRE(!data.empty(), "training dataset is empty");
  SCORESYNC_REQUIRE(data.size() >= 2, "training needs at least two examples (one to validate)");
  const std::size_t out_len = task == ToyTask::inflection ? 2 * config.max_points : config.grid;
  for (std::size_t i = 0; i < data.size(); ++i) {
    SCORESYNC_REQUIRE(data[i].input.shape() == Shape({1, config.grid, config.grid}),
                      "example " + std::to_string(i) + " input is " + shape_string(data[i].input.shape()) +
                          ", expected [1, grid, grid]");
    SCORESYNC_REQUIRE(data[i].target.size() == out_len,
                      "example " + std::to_string(i) + " target has " + std::to_string(data[i].target.size()) +
                          " values, expected " + std::to_string(out_len));
  }

  ToyModel model;
  model.task = task;
  model.config = config;
  std::mt19937_64 rng(config.seed);
  model.net = task == ToyTask::inflection ? build_inflection_model(config, rng) : build_path_model(config, rng);

  const std::size_t n = data.size();
  std::size_t n_val = static_cast<std::size_t>(std::lround(config.validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  const std::size_t n_train = n - n_val;
  TrainReport& rep = model.report;
  rep.train_count = n_train;
  rep.validation_count = n_val;

  auto probe = [&] {
    return task_loss(task, config, model.net.predict(data[0].input), data[0].target, nullptr);
  };
  rep.probe_initial_loss = probe();
  Evaluation ev = evaluate(task, config, model.net, data, n_train, n);
  rep.validation_loss.push_back(ev.loss);
  rep.validation_error.push_back(ev.error);

  SgdMomentum opt(config.learning_rate, config.momentum, config.weight_decay);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  Gradients best = model.net.parameters();
  double best_loss = ev.loss;

  const std::size_t batches_per_epoch = (n_train + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(batches_per_epoch * config.epochs);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t stop = std::min(n_train, start + config.batch_size);
      Gradients grads = model.net.zero_gradients();
      for (std::size_t b = start; b < stop; ++b) {
        const auto& ex = data[order[b]];
        ForwardState state;
        const Tensor y = model.net.forward(ex.input, state);
        Tensor dy;
        const double l = task_loss(task, config, y, ex.target, &dy);
        if (!std::isfinite(l)) {
          throw InvariantError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                               ", example " + std::to_string(order[b]) +
                               "; lower --learning-rate (now " + std::to_string(config.learning_rate) + ")");
        }
        epoch_loss += l;
        model.net.backward(dy, state, grads);
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& layer : grads) {
        for (auto& t : layer) {
          for (double& v : t.values()) v *= inv;
        }
      }
      const double norm = global_norm(grads);
      if (config.clip_norm > 0.0 && norm > config.clip_norm) {
        const double s = config.clip_norm / norm;
        for (auto& layer : grads) {
          for (auto& t : layer) {
            for (double& v : t.values()) v *= s;
          }
        }
      }
      if (config.cosine_decay) {
        opt.set_learning_rate(0.5 * config.learning_rate *
                              (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps)));
      }
      ++step;
      opt.step(model.net, grads);
    }
    rep.train_loss.push_back(epoch_loss / static_cast<double>(n_train));
    ev = evaluate(task, config, model.net, data, n_train, n);
    if (!std::isfinite(ev.loss) || !model.net.parameters_finite()) {
      throw InvariantError("training diverged: non-finite validation loss after epoch " + std::to_string(epoch));
    }
    rep.validation_loss.push_back(ev.loss);
    rep.validation_error.push_back(ev.error);
    if (ev.loss < best_loss) {
      best_loss = ev.loss;
      rep.best_epoch = epoch;
      if (config.early_stopping) best = model.net.parameters();
    }
  }
  if (config.early_stopping) model.net.set_parameters(best);
  rep.final_validation_error = evaluate(task, config, model.net, data, n_train, n).error;
  rep.probe_final_loss = probe();
  return model;
}

}  // namespace

ToyModel train_inflection_regressor(const std::vector<RegressionExample>& dataset, const ToyConfig& config) {
  return train(ToyTask::inflection, dataset, config);
}

ToyModel train_path_regressor(const std::vector<RegressionExample>& dataset, const ToyConfig& config) {
  return train(ToyTask::path, dataset, config);
}

double evaluate_model(const ToyModel& model, const std::vector<RegressionExample>& examples) {
  SCORESYNC_REQUIRE(!examples.empty(), "no examples to evaluate");
  return evaluate(model.task, model.config, model.net, examples, 0, examples.size()).error;
}

double siamese_contrastive(const Network& net, const Tensor& x1, const Tensor& x2, int label, double margin,
                           Gradients* grads) {
  ForwardState s1, s2;
  const Tensor e1 = net.forward(x1, s1);
  const Tensor e2 = net.forward(x2, s2);
  const double d = embedding_distance(e1, e2);
  const double loss = contrastive_loss(d, label, margin);
  if (grads) {
    const double dl = contrastive_loss_grad(d, label, margin);
    Tensor g = embedding_distance_grad(e1, e2);
    for (double& v : g.values()) v *= dl;
    net.backward(g, s1, *grads);
    for (double& v : g.values()) v = -v;
    net.backward(g, s2, *grads);
  }
  return loss;
}

nlohmann::json TrainReport::to_json() const {
  return {{"validation_loss", validation_loss},
          {"train_loss", train_loss},
          {"validation_error", validation_error},
          {"final_validation_error", final_validation_error},
          {"best_epoch", best_epoch},
          {"probe_initial_loss", probe_initial_loss},
          {"probe_final_loss", probe_final_loss},
          {"train_count", train_count},
          {"validation_count", validation_count}};
}

void save_toy_model(const ToyModel& model, const std::filesystem::path& manifest, const nlohmann::json& extra) {
  nlohmann::json meta = {{"tool", std::string("scoresync ") + SCORESYNC_VERSION},
                               {"task", std::string(to_string(model.task))},
                               {"config", model.config.to_json()},
                               {"report", model.report.to_json()}};
  if (extra.is_object()) meta.update(extra);
  save_model(model.net, meta, manifest);
}

ToyModel load_toy_model(const std::filesystem::path& manifest) {
  auto loaded = load_model(manifest);
  ToyModel m;
  m.net = std::move(loaded.net);
  SCORESYNC_REQUIRE(loaded.meta.contains("task") && loaded.meta.contains("config"),
                    "model manifest lacks task/config metadata: " + manifest.string());
  m.task = parse_task(loaded.meta["task"].get<std::string>());
  m.config = ToyConfig::from_json(loaded.meta["config"]);
  if (loaded.meta.contains("report")) {
    const auto& r = loaded.meta["report"];
    m.report.validation_loss = r.value("validation_loss", std::vector<double>{});
    m.report.train_loss = r.value("train_loss", std::vector<double>{});
    m.report.validation_error = r.value("validation_error", std::vector<double>{});
    m.report.final_validation_error = r.value("final_validation_error", 0.0);
    m.report.best_epoch = r.value("best_epoch", std::size_t{0});
    m.report.probe_initial_loss = r.value("probe_initial_loss", 0.0);
    m.report.probe_final_loss = r.value("probe_final_loss", 0.0);
    m.report.train_count = r.value("train_count", std::size_t{0});
    m.report.validation_count = r.value("validation_count", std::size_t{0});
  }
  return m;
}

}  // namespace scoresync::neural
