#include "lddr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gemm.hpp"
#include "lddr/error.hpp"

namespace lddr {

namespace {

std::string dims(const Tensor& t) {
  return std::to_string(t.height()) + "x" + std::to_string(t.width()) + "x" +
         std::to_string(t.channels());
}

}  // namespace

ConvWeights::ConvWeights(int kernel_h, int kernel_w, int in_channels, int out_channels, int groups)
    : kernel_h(kernel_h),
      kernel_w(kernel_w),
      in_channels(in_channels),
      out_channels(out_channels),
      groups(groups) {
  if (kernel_h <= 0 || kernel_w <= 0 || in_channels <= 0 || out_channels <= 0 || groups <= 0) {
    throw ConfigError("conv weights: all dimensions must be positive");
  }
  weights.assign(weight_count(), 0.0);
  bias.assign(static_cast<std::size_t>(out_channels), 0.0);
  validate();
}

std::size_t ConvWeights::weight_count() const noexcept {
  if (groups <= 0) return 0;
  return static_cast<std::size_t>(out_channels) * (in_channels / groups) * kernel_h * kernel_w;
}

double& ConvWeights::at(int oc, int ic, int ky, int kx) noexcept {
  return weights[((static_cast<std::size_t>(oc) * in_per_group() + ic) * kernel_h + ky) * kernel_w +
                 kx];
}

double ConvWeights::at(int oc, int ic, int ky, int kx) const noexcept {
  return weights[((static_cast<std::size_t>(oc) * in_per_group() + ic) * kernel_h + ky) * kernel_w +
                 kx];
}

void ConvWeights::validate() const {
  if (kernel_h <= 0 || kernel_w <= 0 || in_channels <= 0 || out_channels <= 0 || groups <= 0) {
    throw ConfigError("conv weights: all dimensions must be positive");
  }
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw ConfigError("conv weights: channels (" + std::to_string(in_channels) + ", " +
                      std::to_string(out_channels) + ") not divisible by groups " +
                      std::to_string(groups));
  }
  if (weights.size() != weight_count()) {
    throw ConfigError("conv weights: expected " + std::to_string(weight_count()) +
                      " weights, have " + std::to_string(weights.size()));
  }
  if (bias.size() != static_cast<std::size_t>(out_channels)) {
    throw ConfigError("conv weights: expected " + std::to_string(out_channels) +
                      " biases, have " + std::to_string(bias.size()));
  }
}

int conv_output_size(int in, int kernel, int stride, int pad) noexcept {
  const int span = in + 2 * pad - kernel;
  if (span < 0 || stride <= 0) return 0;
  return span / stride + 1;
}

int pool_output_size(int in, int kernel, int stride, int pad, bool ceil_mode) noexcept {
  const int span = in + 2 * pad - kernel;
  if (span < 0 || stride <= 0) return 0;
  int out = (ceil_mode ? (span + stride - 1) / stride : span / stride) + 1;
  // Drop a final window that would start inside the padding.
  if ((out - 1) * stride - pad >= in) --out;
  return out;
}

ConvKernel::ConvKernel(const ConvWeights& w)
    : kernel_h_(w.kernel_h),
      kernel_w_(w.kernel_w),
      in_channels_(w.in_channels),
      out_channels_(w.out_channels),
      groups_(w.groups),
      bias_(w.bias) {
  w.validate();
  const int icg = w.in_per_group();
  const int ocg = w.out_per_group();
  const int rows = kernel_h_ * kernel_w_ * icg;
  std::vector<double> dense(static_cast<std::size_t>(rows) * ocg);
  packed_.resize(static_cast<std::size_t>(groups_));
  for (int g = 0; g < groups_; ++g) {
    for (int o = 0; o < ocg; ++o) {
      const int oc = g * ocg + o;
      for (int ky = 0; ky < kernel_h_; ++ky) {
        for (int kx = 0; kx < kernel_w_; ++kx) {
          for (int ic = 0; ic < icg; ++ic) {
            const int row = (ky * kernel_w_ + kx) * icg + ic;
            dense[static_cast<std::size_t>(row) * ocg + o] = w.at(oc, ic, ky, kx);
          }
        }
      }
    }
    packed_[static_cast<std::size_t>(g)] = detail::pack_panels(dense.data(), rows, ocg, ocg);
  }
}

Tensor ConvKernel::apply(const Tensor& input, int stride, int pad) const {
  return std::move(apply_batch(std::span<const Tensor>(&input, 1), stride, pad).front());
}

std::vector<Tensor> ConvKernel::apply_batch(std::span<const Tensor> inputs, int stride,
                                            int pad) const {
  if (stride <= 0 || pad < 0) throw ConfigError("conv2d: stride must be >= 1 and pad >= 0");
  if (inputs.empty()) return {};
  const Tensor& first = inputs.front();
  for (const auto& in : inputs) {
    if (in.channels() != in_channels_) {
      throw ConfigError("conv2d: input has " + std::to_string(in.channels()) +
                        " channels, kernel expects " + std::to_string(in_channels_));
    }
    if (in.height() != first.height() || in.width() != first.width()) {
      throw InputError("conv2d: batch mixes " + dims(first) + " and " + dims(in) + " inputs");
    }
  }
  const int in_h = first.height();
  const int in_w = first.width();
  const int out_h = conv_output_size(in_h, kernel_h_, stride, pad);
  const int out_w = conv_output_size(in_w, kernel_w_, stride, pad);
  if (out_h < 1 || out_w < 1) {
    throw GeometryError("conv2d: " + std::to_string(kernel_h_) + "x" + std::to_string(kernel_w_) +
                        " window larger than padded input " + dims(first));
  }

  const int icg = in_channels_ / groups_;
  const int ocg = out_channels_ / groups_;
  const int rows = kernel_h_ * kernel_w_ * icg;
  const int pixels = out_h * out_w;

  // Bound the im2col buffer by convolving a few inputs at a time.
  constexpr std::size_t kColumnBudget = std::size_t{1} << 20;  // doubles
  const std::size_t per_input = static_cast<std::size_t>(pixels) * rows;
  const std::size_t chunk = std::max<std::size_t>(1, kColumnBudget / per_input);

  std::vector<Tensor> outputs;
  outputs.reserve(inputs.size());
  std::vector<double> columns;
  std::vector<double> result;
  for (std::size_t b0 = 0; b0 < inputs.size(); b0 += chunk) {
    const std::size_t count = std::min(chunk, inputs.size() - b0);
    const int m = static_cast<int>(count) * pixels;
    columns.resize(static_cast<std::size_t>(m) * rows);
    result.resize(static_cast<std::size_t>(m) * out_channels_);
    for (int g = 0; g < groups_; ++g) {
      const int c0 = g * icg;
      for (std::size_t b = 0; b < count; ++b) {
        const Tensor& input = inputs[b0 + b];
        const double* src = input.data().data();
        for (int oy = 0; oy < out_h; ++oy) {
          for (int ox = 0; ox < out_w; ++ox) {
            double* row = columns.data() +
                          (b * pixels + static_cast<std::size_t>(oy * out_w + ox)) * rows;
            for (int ky = 0; ky < kernel_h_; ++ky) {
              const int iy = oy * stride - pad + ky;
              for (int kx = 0; kx < kernel_w_; ++kx) {
                const int ix = ox * stride - pad + kx;
                double* dst = row + (ky * kernel_w_ + kx) * icg;
                if (iy < 0 || iy >= in_h || ix < 0 || ix >= in_w) {
                  std::fill(dst, dst + icg, 0.0);
                } else {
                  std::copy_n(src + input.offset(iy, ix, c0), icg, dst);
                }
              }
            }
          }
        }
      }
      detail::gemm(columns.data(), m, rows, packed_[static_cast<std::size_t>(g)].data(), rows,
                   ocg, result.data() + g * ocg, out_channels_);
    }
    for (std::size_t b = 0; b < count; ++b) {
      Tensor out(out_h, out_w, out_channels_);
      const double* src = result.data() + b * pixels * out_channels_;
      double* dst = out.data().data();
      for (int p = 0; p < pixels; ++p) {
        for (int c = 0; c < out_channels_; ++c) {
          dst[p * out_channels_ + c] = src[p * out_channels_ + c] + bias_[c];
        }
      }
      outputs.push_back(std::move(out));
    }
  }
  return outputs;
}

Tensor conv2d(const Tensor& input, const ConvWeights& weights, int stride, int pad) {
  return ConvKernel(weights).apply(input, stride, pad);
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data()) v = std::max(0.0, v);
  return out;
}

Tensor lrn(const Tensor& input, const LrnParams& p) {
  if (p.size <= 0 || p.size % 2 == 0) {
    throw ConfigError("lrn: window size must be a positive odd integer, got " +
                      std::to_string(p.size));
  }
  if (!(p.k > 0.0)) throw ConfigError("lrn: k must be positive");
  const int channels = input.channels();
  const int half = p.size / 2;
  const double scale = p.alpha / p.size;
  const bool three_quarters = p.beta == 0.75;
  Tensor out(input.height(), input.width(), channels);
  std::vector<double> squares(static_cast<std::size_t>(channels));
  const double* in = input.data().data();
  double* dst = out.data().data();
  const std::size_t pixels = static_cast<std::size_t>(input.height()) * input.width();
  for (std::size_t px = 0; px < pixels; ++px) {
    const double* v = in + px * channels;
    for (int c = 0; c < channels; ++c) squares[c] = v[c] * v[c];
    for (int c = 0; c < channels; ++c) {
      const int lo = std::max(0, c - half);
      const int hi = std::min(channels - 1, c + half);
      double sum = 0.0;
      for (int j = lo; j <= hi; ++j) sum += squares[j];
      const double base = p.k + scale * sum;
      // base^0.75 = sqrt(base) * sqrt(sqrt(base)); much cheaper than pow.
      const double denom = three_quarters ? std::sqrt(base) * std::sqrt(std::sqrt(base))
                                          : std::pow(base, p.beta);
      dst[px * channels + c] = v[c] / denom;
    }
  }
  return out;
}

Tensor maxpool2d(const Tensor& input, int kernel, int stride, int pad, bool ceil_mode) {
  if (kernel <= 0 || stride <= 0 || pad < 0) {
    throw ConfigError("maxpool2d: kernel and stride must be >= 1, pad >= 0");
  }
  const int out_h = pool_output_size(input.height(), kernel, stride, pad, ceil_mode);
  const int out_w = pool_output_size(input.width(), kernel, stride, pad, ceil_mode);
  if (out_h < 1 || out_w < 1) {
    throw GeometryError("maxpool2d: kernel " + std::to_string(kernel) +
                        " leaves an empty window on input " + dims(input));
  }
  const int channels = input.channels();
  Tensor out(out_h, out_w, channels);
  for (int oy = 0; oy < out_h; ++oy) {
    const int y0 = std::max(0, oy * stride - pad);
    const int y1 = std::min(input.height(), oy * stride - pad + kernel);
    for (int ox = 0; ox < out_w; ++ox) {
      const int x0 = std::max(0, ox * stride - pad);
      const int x1 = std::min(input.width(), ox * stride - pad + kernel);
      double* dst = out.data().data() + out.offset(oy, ox);
      auto first = input.pixel(y0, x0);
      std::copy(first.begin(), first.end(), dst);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          auto px = input.pixel(y, x);
          for (int c = 0; c < channels; ++c) dst[c] = std::max(dst[c], px[c]);
        }
      }
    }
  }
  return out;
}

}  // namespace lddr
