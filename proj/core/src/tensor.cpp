#include "lddr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lddr/error.hpp"

namespace lddr {

namespace {

void check_dims(int h, int w, int c) {
  if (h <= 0 || w <= 0 || c <= 0) {
    throw InputError("tensor dimensions must be positive, got " + std::to_string(h) + "x" +
                     std::to_string(w) + "x" + std::to_string(c));
  }
}

}  // namespace

Tensor::Tensor(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Tensor::Tensor(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw InputError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dimensions");
  }
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace lddr
