#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lddr/tensor.hpp"

namespace lddr {

/// Filter bank of one convolution layer. Weights are stored in
/// (out_channels, in_channels / groups, kernel_h, kernel_w) order.
struct ConvWeights {
  int kernel_h = 0;
  int kernel_w = 0;
  int in_channels = 0;
  int out_channels = 0;
  int groups = 1;
  std::vector<double> weights;
  std::vector<double> bias;

  ConvWeights() = default;
  /// Zero-initialised weights and biases of the given geometry.
  ConvWeights(int kernel_h, int kernel_w, int in_channels, int out_channels, int groups = 1);

  int in_per_group() const noexcept { return in_channels / groups; }
  int out_per_group() const noexcept { return out_channels / groups; }
  std::size_t weight_count() const noexcept;

  /// `ic` indexes channels within the output channel's group.
  double& at(int oc, int ic, int ky, int kx) noexcept;
  double at(int oc, int ic, int ky, int kx) const noexcept;

  /// Throws ConfigError when dimensions, groups or lengths are inconsistent.
  void validate() const;

  friend bool operator==(const ConvWeights&, const ConvWeights&) = default;
};

/// Output size of a convolution window sweep: floor((in + 2 pad - kernel) / stride) + 1.
/// Returns 0 when the kernel does not fit the padded input.
int conv_output_size(int in, int kernel, int stride, int pad) noexcept;

/// Output size of a pooling sweep, ceil- or floor-rounded. A final window that
/// would start inside the padding is dropped. Returns 0 when the kernel does not fit.
int pool_output_size(int in, int kernel, int stride, int pad, bool ceil_mode) noexcept;

/// Convolution weights repacked for im2col + GEMM. Construction validates.
class ConvKernel {
 public:
  explicit ConvKernel(const ConvWeights& weights);

  Tensor apply(const Tensor& input, int stride, int pad) const;

  /// Convolves equally sized inputs in shared GEMM calls. Output i is
  /// bit-identical to apply(inputs[i], ...).
  std::vector<Tensor> apply_batch(std::span<const Tensor> inputs, int stride, int pad) const;

  int in_channels() const noexcept { return in_channels_; }
  int out_channels() const noexcept { return out_channels_; }

 private:
  int kernel_h_;
  int kernel_w_;
  int in_channels_;
  int out_channels_;
  int groups_;
  // Per group: the (kernel_h * kernel_w * in_per_group) x out_per_group
  // weight matrix in GEMM panel layout.
  std::vector<std::vector<double>> packed_;
  std::vector<double> bias_;
};

Tensor conv2d(const Tensor& input, const ConvWeights& weights, int stride, int pad);

Tensor relu(const Tensor& input);

struct LrnParams {
  int size = 5;
  double alpha = 1e-4;
  double beta = 0.75;
  double k = 2.0;

  friend bool operator==(const LrnParams&, const LrnParams&) = default;
};

/// Across-channel local response normalisation:
/// out = in / (k + alpha / size * sum of squares in window) ^ beta.
Tensor lrn(const Tensor& input, const LrnParams& params = {});

/// Max pooling. Padded positions never contribute to the maximum.
Tensor maxpool2d(const Tensor& input, int kernel, int stride, int pad, bool ceil_mode);

}  // namespace lddr
