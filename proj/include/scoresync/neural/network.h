#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "scoresync/neural/layers.h"

namespace scoresync::neural {

/// Per-call activations; owned by the caller so forward passes on distinct
/// states may run concurrently.
struct ForwardState {
  std::vector<LayerCache> caches;
};

/// One tensor list per layer, mirroring Layer::params().
using Gradients = std::vector<std::vector<Tensor>>;

class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  /// Appends a layer and returns its index.
  std::size_t add(std::unique_ptr<Layer> layer);

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  Tensor forward(const Tensor& x, ForwardState& state) const;
  Tensor predict(const Tensor& x) const;
  /// Accumulates parameter gradients into `grads`; returns the input gradient.
  Tensor backward(const Tensor& dy, const ForwardState& state, Gradients& grads) const;

  Gradients zero_gradients() const;
  std::size_t parameter_count() const;
  bool parameters_finite() const;

  /// Layer configs in order; with parameters() this rebuilds the network.
  nlohmann::json architecture() const;
  static Network from_architecture(const nlohmann::json& arch);

  /// Copy of every parameter tensor, layer by layer.
  Gradients parameters() const;
  void set_parameters(const Gradients& params);

  Network clone() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Sum of squares over all gradient tensors, square-rooted.
double global_norm(const Gradients& g);

/// Classic momentum: v <- mu v - lr (g + wd p); p <- p + v.
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum, double weight_decay = 0.0)
      : lr_(learning_rate), mu_(momentum), wd_(weight_decay) {}
  void set_learning_rate(double lr) { lr_ = lr; }
  void step(Network& net, const Gradients& grads);

 private:
  double lr_;
  double mu_;
  double wd_;
  Gradients velocity_;
};

/// Weights on disk: a JSON manifest (architecture, shapes, metadata) and a
/// flat little-endian float64 file next to it with extension ".bin".
void save_model(const Network& net, const nlohmann::json& meta, const std::filesystem::path& manifest);

struct LoadedModel {
  Network net;
  nlohmann::json meta;
};
LoadedModel load_model(const std::filesystem::path& manifest);

}  // namespace scoresync::neural
