#include "scoresync/neural/network.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "scoresync/error.h"

namespace scoresync::neural {

std::size_t Network::add(std::unique_ptr<Layer> layer) {
  SCORESYNC_REQUIRE(layer != nullptr, "cannot add a null layer");
  if (auto* un = dynamic_cast<MaxUnpoolLayer*>(layer.get())) {
    SCORESYNC_REQUIRE(un->source() < layers_.size() && layers_[un->source()]->kind() == "maxpool",
                      "unpool layer must reference an earlier pooling layer");
  }
  layers_.push_back(std::move(layer));
  return layers_.size() - 1;
}

Tensor Network::forward(const Tensor& x, ForwardState& state) const {
  state.caches.assign(layers_.size(), LayerCache{});
  Tensor cur = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (const auto* un = dynamic_cast<const MaxUnpoolLayer*>(layers_[i].get())) {
      state.caches[i].linked = &state.caches[un->source()].mask;
    }
    cur = layers_[i]->forward(cur, state.caches[i]);
  }
  return cur;
}

Tensor Network::predict(const Tensor& x) const {
  ForwardState state;
  return forward(x, state);
}

Tensor Network::backward(const Tensor& dy, const ForwardState& state, Gradients& grads) const {
  SCORESYNC_ASSERT(state.caches.size() == layers_.size() && grads.size() == layers_.size(),
                   "backward called without a matching forward state");
  Tensor cur = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) cur = layers_[i]->backward(cur, state.caches[i], grads[i]);
  return cur;
}

Gradients Network::zero_gradients() const {
  Gradients g(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (const auto& p : layers_[i]->params()) g[i].emplace_back(p.shape());
  }
  return g;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    for (const auto& p : l->params()) n += p.size();
  }
  return n;
}

bool Network::parameters_finite() const {
  for (const auto& l : layers_) {
    for (const auto& p : l->params()) {
      if (!p.all_finite()) return false;
    }
  }
  return true;
}

nlohmann::json Network::architecture() const {
  auto arr = nlohmann::json::array();
  for (const auto& l : layers_) arr.push_back(l->config());
  return arr;
}

Network Network::from_architecture(const nlohmann::json& arch) {
  SCORESYNC_REQUIRE(arch.is_array(), "architecture must be a JSON array of layer configs");
  Network net;
  for (const auto& c : arch) net.add(layer_from_config(c));
  return net;
}

Gradients Network::parameters() const {
  Gradients out(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) out[i] = layers_[i]->params();
  return out;
}

void Network::set_parameters(const Gradients& params) {
  SCORESYNC_REQUIRE(params.size() == layers_.size(), "parameter list does not match the layer count");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& dst = layers_[i]->params();
    SCORESYNC_REQUIRE(params[i].size() == dst.size(), "parameter count mismatch at layer " + std::to_string(i));
    for (std::size_t k = 0; k < dst.size(); ++k) {
      SCORESYNC_REQUIRE(params[i][k].shape() == dst[k].shape(),
                        "parameter shape mismatch at layer " + std::to_string(i) + ": expected " +
                            shape_string(dst[k].shape()) + ", got " + shape_string(params[i][k].shape()));
      dst[k] = params[i][k];
    }
  }
}

Network Network::clone() const {
  Network copy = from_architecture(architecture());
  copy.set_parameters(parameters());
  return copy;
}

double global_norm(const Gradients& g) {
  double acc = 0.0;
  for (const auto& layer : g) {
    for (const auto& t : layer) {
      for (double v : t.values()) acc += v * v;
    }
  }
  return std::sqrt(acc);
}

void SgdMomentum::step(Network& net, const Gradients& grads) {
  if (velocity_.empty()) velocity_ = net.zero_gradients();
  SCORESYNC_ASSERT(grads.size() == net.size(), "optimizer gradient layout mismatch");
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& params = net.layer(i).params();
    for (std::size_t k = 0; k < params.size(); ++k) {
      double* p = params[k].data();
      double* v = velocity_[i][k].data();
      const double* g = grads[i][k].data();
      for (std::size_t j = 0; j < params[k].size(); ++j) {
        v[j] = mu_ * v[j] - lr_ * (g[j] + wd_ * p[j]);
        p[j] += v[j];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::filesystem::path weights_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_model(const Network& net, const nlohmann::json& meta, const std::filesystem::path& manifest) {
  SCORESYNC_REQUIRE(manifest.extension() == ".json", "model manifest path must end in .json: " + manifest.string());
  std::string blob;
  auto shapes = nlohmann::json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto layer_shapes = nlohmann::json::array();
    for (const auto& p : net.layer(i).params()) {
      layer_shapes.push_back(p.shape());
      for (double v : p.values()) put_le(blob, v);
    }
    shapes.push_back(layer_shapes);
  }
  const auto bin = weights_path(manifest);
  nlohmann::json doc = {{"format", "scoresync-model"},
                        {"version", 1},
                        {"architecture", net.architecture()},
                        {"shapes", shapes},
                        {"weights_file", bin.filename().string()},
                        {"value_count", blob.size() / 8},
                        {"meta", meta}};
  {
    std::ofstream out(bin, std::ios::binary);
    SCORESYNC_REQUIRE(out.good(), "cannot write " + bin.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    SCORESYNC_REQUIRE(out.good(), "failed writing " + bin.string());
  }
  std::ofstream out(manifest);
  SCORESYNC_REQUIRE(out.good(), "cannot write " + manifest.string());
  out << doc.dump(2) << '\n';
}

LoadedModel load_model(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  SCORESYNC_REQUIRE(in.good(), "cannot open model manifest " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed model manifest " + manifest.string() + ": " + e.what());
  }
  SCORESYNC_REQUIRE(doc.value("format", "") == "scoresync-model", "not a scoresync model manifest: " + manifest.string());
  LoadedModel out{Network::from_architecture(doc.at("architecture")), doc.value("meta", nlohmann::json::object())};

  const auto bin = manifest.parent_path() / doc.at("weights_file").get<std::string>();
  std::ifstream bin_in(bin, std::ios::binary);
  SCORESYNC_REQUIRE(bin_in.good(), "cannot open weights file " + bin.string());
  const std::string blob((std::istreambuf_iterator<char>(bin_in)), std::istreambuf_iterator<char>());
  SCORESYNC_REQUIRE(blob.size() == 8 * out.net.parameter_count(),
                    "weights file " + bin.string() + " holds " + std::to_string(blob.size()) + " bytes, expected " +
                        std::to_string(8 * out.net.parameter_count()));
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  std::size_t off = 0;
  for (std::size_t i = 0; i < out.net.size(); ++i) {
    for (auto& p : out.net.layer(i).params()) {
      for (auto& v : p.values()) {
        v = get_le(bytes + off);
        off += 8;
      }
    }
  }
  SCORESYNC_REQUIRE(out.net.parameters_finite(), "weights file " + bin.string() + " contains non-finite values");
  return out;
}

}  // namespace scoresync::neural
