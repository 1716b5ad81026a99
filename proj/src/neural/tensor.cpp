#include "scoresync/neural/tensor.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "scoresync/error.h"

namespace scoresync::neural {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {
  for (auto e : shape_) SCORESYNC_REQUIRE(e > 0, "tensor extents must be positive: " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto e : shape_) SCORESYNC_REQUIRE(e > 0, "tensor extents must be positive: " + shape_string(shape_));
  SCORESYNC_REQUIRE(values_.size() == shape_size(shape_),
                    "tensor data length " + std::to_string(values_.size()) + " does not match shape " +
                        shape_string(shape_));
}

Tensor Tensor::reshaped(Shape shape) const {
  SCORESYNC_REQUIRE(shape_size(shape) == size(),
                    "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), values_);
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace scoresync::neural
