#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lddr {

/// Dense height x width x channels array, row-major with interleaved channels.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int height, int width, int channels, double fill = 0.0);
  Tensor(int height, int width, int channels, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t offset(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  double& operator()(int y, int x, int c = 0) noexcept { return data_[offset(y, x, c)]; }
  double operator()(int y, int x, int c = 0) const noexcept { return data_[offset(y, x, c)]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  /// Channels of one pixel.
  std::span<const double> pixel(int y, int x) const noexcept {
    return {data_.data() + offset(y, x), static_cast<std::size_t>(channels_)};
  }

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

}  // namespace lddr
