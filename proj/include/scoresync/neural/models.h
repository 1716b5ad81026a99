#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scoresync/features.h"
#include "scoresync/neural/network.h"
#include "scoresync/structure.h"

namespace scoresync::neural {

inline constexpr std::size_t kToyGrid = 64;

/// One training pair in model units: a standardized [1, grid, grid] input and
/// a target vector scaled by 1/grid.
struct RegressionExample {
  Tensor input;
  std::vector<double> target;
};

/// Nearest-neighbour resampling of a cost matrix to grid x grid, then
/// zero-mean unit-variance standardization (a constant matrix maps to zeros).
Tensor matrix_to_input(const CrossSimilarityMatrix& cost, std::size_t grid);

/// Inflection coordinates rescaled to the grid and divided by it; unused
/// slots hold the sentinel 4 (that is, 4 * grid in grid units).
RegressionExample inflection_example(const CrossSimilarityMatrix& cost, const InflectionPointSet& points,
                                     std::size_t max_points, std::size_t grid);

/// Score index per performance frame, resampled to `grid` entries and scaled.
RegressionExample path_example(const CrossSimilarityMatrix& cost, const std::vector<std::size_t>& score_index,
                               std::size_t grid);

inline constexpr double kSentinelGridMultiple = 4.0;

struct SyntheticOptions {
  std::size_t grid = kToyGrid;
  /// Feature noise added to the performance before renormalization.
  double noise = 0.05;
  std::size_t max_points = 4;
};

/// Non-negative unit-norm 12-bin frames, i.i.d. per frame.
FeatureSequence random_chroma_sequence(std::size_t frames, std::mt19937_64& rng, double hop_seconds = 0.05);

/// Score of `grid` frames, perturbed with 1 or 2 jumps by synth_perturb.
/// Item k is generated from its own seed, so items are order independent.
std::vector<RegressionExample> make_inflection_dataset(std::size_t n, std::uint64_t seed,
                                                       const SyntheticOptions& options = {});

/// Monotone piecewise-linear tempo warps of a `grid`-frame score.
std::vector<RegressionExample> make_path_dataset(std::size_t n, std::uint64_t seed,
                                                 const SyntheticOptions& options = {});

enum class ToyTask { inflection, path };
enum class PathLoss { divergence, mse };

std::string_view to_string(ToyTask task);
ToyTask parse_task(std::string_view text);
std::string_view to_string(PathLoss loss);
PathLoss parse_path_loss(std::string_view text);

struct ToyConfig {
  std::uint64_t seed = 1;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  /// Cosine decay of the learning rate to zero over the epochs.
  bool cosine_decay = true;
  std::size_t batch_size = 16;
  std::size_t epochs = 40;
  double validation_fraction = 0.2;
  /// Global gradient-norm clip per batch; 0 disables.
  double clip_norm = 5.0;
  /// Keep the weights of the epoch with the lowest validation loss.
  bool early_stopping = true;
  std::size_t channels = 8;
  std::size_t hidden = 64;
  std::size_t grid = kToyGrid;

  // Inflection regressor.
  std::vector<std::size_t> dilations = {1, 2, 3};
  std::size_t max_points = 4;

  // Path regressor.
  bool use_sasa = true;
  std::size_t sasa_extent = 1;
  PathLoss loss = PathLoss::divergence;
  double lambda = 0.1;
  /// Path losses compare index sequences multiplied by this; 0 means grid,
  /// i.e. score frames.
  double index_scale = 0.0;

  nlohmann::json to_json() const;
  static ToyConfig from_json(const nlohmann::json& j);
};

/// Tuned defaults per task (the inflection model trains at lr 0.03).
ToyConfig default_toy_config(ToyTask task);

Network build_inflection_model(const ToyConfig& config, std::mt19937_64& rng);
Network build_path_model(const ToyConfig& config, std::mt19937_64& rng);

struct TrainReport {
  /// Validation loss before training, then after every epoch.
  std::vector<double> validation_loss;
  /// Mean minibatch training loss per epoch.
  std::vector<double> train_loss;
  /// Validation error in grid frames per epoch (index 0 = before training).
  std::vector<double> validation_error;
  double final_validation_error = 0.0;
  std::size_t best_epoch = 0;
  /// Loss on training example 0 before and after training.
  double probe_initial_loss = 0.0;
  double probe_final_loss = 0.0;
  std::size_t train_count = 0;
  std::size_t validation_count = 0;

  nlohmann::json to_json() const;
};

struct ToyModel {
  ToyTask task = ToyTask::inflection;
  ToyConfig config;
  Network net;
  TrainReport report;
};

/// Loss and d(loss)/d(output) for one prediction in model units.
double task_loss(ToyTask task, const ToyConfig& config, const Tensor& pred, const std::vector<double>& target,
                 Tensor* grad);

/// Mean absolute coordinate error in grid frames over the real (non-sentinel)
/// target slots; predictions are clamped to [0, grid - 1]. Returns {sum, count}.
std::pair<double, std::size_t> inflection_error(const Tensor& pred, const std::vector<double>& target,
                                                std::size_t grid);
/// Mean |y_hat - y| in grid frames; returns {sum, count}.
std::pair<double, std::size_t> path_error(const Tensor& pred, const std::vector<double>& target, std::size_t grid);

/// Deterministic split: the last round(fraction * n) examples validate.
ToyModel train_inflection_regressor(const std::vector<RegressionExample>& dataset, const ToyConfig& config);
ToyModel train_path_regressor(const std::vector<RegressionExample>& dataset, const ToyConfig& config);

/// Mean validation error of a trained model on `examples`.
double evaluate_model(const ToyModel& model, const std::vector<RegressionExample>& examples);

/// Contrastive loss of a weight-shared twin pass, D = |G(x1) - G(x2)|.
/// When `grads` is given, gradients of both branches accumulate into it.
double siamese_contrastive(const Network& net, const Tensor& x1, const Tensor& x2, int label, double margin,
                           Gradients* grads = nullptr);

/// `extra` fields are merged into the manifest metadata.
void save_toy_model(const ToyModel& model, const std::filesystem::path& manifest,
                    const nlohmann::json& extra = nlohmann::json::object());
ToyModel load_toy_model(const std::filesystem::path& manifest);

}  // namespace scoresync::neural
