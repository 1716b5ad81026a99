#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scoresync/neural/tensor.h"

namespace scoresync::neural {

/// m' = m + (d - 1)(m - 1): extent covered by an m-tap kernel at dilation d.
std::size_t effective_kernel_size(std::size_t m, std::size_t d);

/// Flat input index of the maximum of every 2x2 window, in output order.
struct PoolMask {
  Shape input_shape;
  std::vector<std::size_t> argmax;
};

// Stateless ops on [c, h, w] tensors. Backward functions return the input
// gradient and accumulate parameter gradients into the passed tensors.

/// Valid true convolution: y[o,i,j] = b[o] + sum_{c,t,s} w[o,c,t,s] x[c, i + d(m-1-t), j + d(m-1-s)].
Tensor conv2d_forward(const Tensor& x, const Tensor& kernels, const Tensor& bias, std::size_t dilation);
Tensor conv2d_backward(const Tensor& x, const Tensor& dy, const Tensor& kernels, std::size_t dilation,
                       Tensor& d_kernels, Tensor& d_bias);

/// Kernel with (d - 1) zero rows/columns between taps.
Tensor expand_kernel(const Tensor& kernels, std::size_t dilation);

Tensor zero_pad(const Tensor& x, std::size_t pad);
Tensor zero_pad_backward(const Tensor& dy, std::size_t pad);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

/// 2x2 stride-2 max pooling; ties go to the lowest flat index.
Tensor max_pool2d(const Tensor& x, PoolMask& mask);
Tensor max_pool2d_backward(const Tensor& dy, const PoolMask& mask);
Tensor max_unpool2d(const Tensor& x, const PoolMask& mask);
Tensor max_unpool2d_backward(const Tensor& dy, const PoolMask& mask);

/// y = W flat(x) + b with W of shape [out, in].
Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias);
Tensor dense_backward(const Tensor& x, const Tensor& dy, const Tensor& weights, Tensor& d_weights,
                      Tensor& d_bias);

inline constexpr std::size_t kSasaHeads = 4;

/// Parameters of one stand-alone self-attention layer. Channels split into
/// four equal groups; each head has its own hd x hd projections.
struct SasaParams {
  Tensor w_q, w_k, w_v;           // [heads, hd, hd]
  Tensor row_embed, col_embed;    // [2k+1, hd/2], shared by the heads
  std::size_t extent = 1;         // k: neighbourhood is (2k+1)^2
};

/// Intermediates kept for the backward pass.
struct SasaCache {
  Tensor q, k, v;                 // [c, h, w]
  std::vector<double> weights;    // [heads, h, w, (2k+1)^2]; out-of-bounds slots are 0
};

Tensor sasa_forward(const Tensor& x, const SasaParams& p, SasaCache& cache);
/// `grads` uses the SasaParams layout; `extent` is ignored.
Tensor sasa_backward(const Tensor& x, const Tensor& dy, const SasaParams& p, const SasaCache& cache,
                     SasaParams& grads);

// ---------------------------------------------------------------------------
// Layer objects used by Network.

struct LayerCache {
  Tensor input;
  PoolMask mask;
  SasaCache sasa;
  /// Mask of the pooling layer an unpool layer reverses; set by Network.
  const PoolMask* linked = nullptr;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Tensor forward(const Tensor& x, LayerCache& cache) const = 0;
  /// Accumulates into `grads`, which mirrors params().
  virtual Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const = 0;
  /// Layer hyper-parameters; enough to rebuild an uninitialised copy.
  virtual nlohmann::json config() const = 0;

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

 protected:
  std::vector<Tensor> params_;
};

class Conv2dLayer : public Layer {
 public:
  Conv2dLayer(std::size_t in_ch, std::size_t out_ch, std::size_t m, std::size_t dilation);
  /// He-normal kernels, zero bias.
  void init(std::mt19937_64& rng);

  std::string kind() const override { return "conv2d"; }
  Tensor forward(const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const override;
  nlohmann::json config() const override;

  Tensor& kernels() { return params_[0]; }
  Tensor& bias() { return params_[1]; }
  std::size_t dilation() const { return dilation_; }

 private:
  std::size_t dilation_;
};

class PadLayer : public Layer {
 public:
  explicit PadLayer(std::size_t pad) : pad_(pad) {}
  std::string kind() const override { return "pad"; }
  Tensor forward(const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const override;
  nlohmann::json config() const override;

 private:
  std::size_t pad_;
};

class ReluLayer : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const override;
  nlohmann::json config() const override;
};

class MaxPoolLayer : public Layer {
 public:
  std::string kind() const override { return "maxpool"; }
  Tensor forward(const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const override;
  nlohmann::json config() const override;
};

/// Reverses the pooling layer at index `source` of the owning network.
class MaxUnpoolLayer : public Layer {
 public:
  explicit MaxUnpoolLayer(std::size_t source) : source_(source) {}
  std::string kind() const override { return "maxunpool"; }
  Tensor forward(const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const override;
  nlohmann::json config() const override;
  std::size_t source() const { return source_; }

 private:
  std::size_t source_;
};

class DenseLayer : public Layer {
 public:
  DenseLayer(std::size_t in, std::size_t out);
  void init(std::mt19937_64& rng);

  std::string kind() const override { return "dense"; }
  Tensor forward(const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const override;
  nlohmann::json config() const override;

  Tensor& weights() { return params_[0]; }
  Tensor& bias() { return params_[1]; }
};

class FlattenLayer : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  Tensor forward(const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const override;
  nlohmann::json config() const override;
};

/// params() order: w_q, w_k, w_v, row_embed, col_embed.
class SasaLayer : public Layer {
 public:
  SasaLayer(std::size_t channels, std::size_t extent);
  /// He-normal projections, embeddings uniform in [-0.1, 0.1].
  void init(std::mt19937_64& rng);

  std::string kind() const override { return "sasa"; }
  Tensor forward(const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const override;
  nlohmann::json config() const override;

  SasaParams view() const;
  std::size_t channels() const { return channels_; }
  std::size_t extent() const { return extent_; }

 private:
  std::size_t channels_;
  std::size_t extent_;
};

/// Rebuild a layer (parameters zeroed) from its config().
std::unique_ptr<Layer> layer_from_config(const nlohmann::json& config);

}  // namespace scoresync::neural
