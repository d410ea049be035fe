#include <benchmark/benchmark.h>

#include <optional>

#include "lddr/engine.hpp"
#include "lddr/kernels.hpp"
#include "lddr/network.hpp"
#include "lddr/rng.hpp"
#include "lddr/weights.hpp"

namespace {

lddr::Tensor random_tensor(int h, int w, int c, std::uint64_t seed) {
  lddr::Rng rng(seed);
  lddr::Tensor t(h, w, c);
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

const lddr::Engine& engine() {
  static const lddr::Engine e(lddr::init_random_weights(11, 0.02), lddr::standard_stage_configs());
  return e;
}

// Every layer of one stage, isolated.
void BM_Layer(benchmark::State& state) {
  const int stage = static_cast<int>(state.range(0));
  const std::size_t layer = static_cast<std::size_t>(state.range(1));
  const auto& cfg = engine().stage(stage);
  const auto& weights = engine().weights();
  lddr::Tensor x = random_tensor(cfg.input_size, cfg.input_size, 3, 1);
  for (std::size_t i = 0; i < layer; ++i) {
    const auto& l = cfg.layers[i];
    switch (l.kind) {
      case lddr::LayerKind::conv:
        x = lddr::conv2d(x, *weights.find(l.name), l.stride, l.pad);
        break;
      case lddr::LayerKind::relu: x = lddr::relu(x); break;
      case lddr::LayerKind::lrn: x = lddr::lrn(x, cfg.lrn); break;
      case lddr::LayerKind::maxpool:
        x = lddr::maxpool2d(x, l.kernel, l.stride, l.pad, l.ceil_mode);
        break;
    }
  }
  const auto& l = cfg.layers[layer];
  state.SetLabel(l.name);
  const lddr::ConvKernel* kernel = nullptr;
  std::optional<lddr::ConvKernel> packed;
  if (l.kind == lddr::LayerKind::conv) {
    packed.emplace(*weights.find(l.name));
    kernel = &*packed;
  }
  for (auto _ : state) {
    switch (l.kind) {
      case lddr::LayerKind::conv: benchmark::DoNotOptimize(kernel->apply(x, l.stride, l.pad)); break;
      case lddr::LayerKind::relu: benchmark::DoNotOptimize(lddr::relu(x)); break;
      case lddr::LayerKind::lrn: benchmark::DoNotOptimize(lddr::lrn(x, cfg.lrn)); break;
      case lddr::LayerKind::maxpool:
        benchmark::DoNotOptimize(lddr::maxpool2d(x, l.kernel, l.stride, l.pad, l.ceil_mode));
        break;
    }
  }
}
BENCHMARK(BM_Layer)
    ->ArgsProduct({{1, 4}, benchmark::CreateDenseRange(0, 12, 1)})
    ->Unit(benchmark::kMicrosecond);

void BM_ForwardPatch(benchmark::State& state) {
  const int stage = static_cast<int>(state.range(0));
  const int size = engine().stage(stage).input_size;
  const lddr::Tensor patch = random_tensor(size, size, 3, 2);
  for (auto _ : state) benchmark::DoNotOptimize(engine().forward(stage, patch));
}
BENCHMARK(BM_ForwardPatch)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

// One shape-indexed feature: 68 patches through one stage.
void BM_ForwardBatch68(benchmark::State& state) {
  const int stage = static_cast<int>(state.range(0));
  const int size = engine().stage(stage).input_size;
  std::vector<lddr::Tensor> patches;
  for (int i = 0; i < 68; ++i) patches.push_back(random_tensor(size, size, 3, 100 + i));
  for (auto _ : state) benchmark::DoNotOptimize(engine().forward_batch(stage, patches));
  state.SetItemsProcessed(state.iterations() * 68);
}
BENCHMARK(BM_ForwardBatch68)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

// Batched convolution of 68 inputs through one layer.
void BM_ConvBatch68(benchmark::State& state) {
  const int stage = static_cast<int>(state.range(0));
  const std::size_t layer = static_cast<std::size_t>(state.range(1));
  const auto& cfg = engine().stage(stage);
  const auto& l = cfg.layers[layer];
  const auto geo = lddr::output_geometry(cfg);
  const int in = layer == 0 ? cfg.input_size : geo[layer - 1].out_h;
  const int channels = layer == 0 ? 3 : geo[layer - 1].out_c;
  std::vector<lddr::Tensor> xs;
  for (int i = 0; i < 68; ++i) xs.push_back(random_tensor(in, in, channels, 300 + i));
  const lddr::ConvKernel kernel(*engine().weights().find(l.name));
  for (auto _ : state) benchmark::DoNotOptimize(kernel.apply_batch(xs, l.stride, l.pad));
  const auto& g = geo[layer];
  const auto& w = *engine().weights().find(l.name);
  const double flops = 2.0 * 68 * g.out_h * g.out_w * g.out_c * w.kernel_h * w.kernel_w *
                       w.in_per_group();
  state.counters["GFLOPS"] =
      benchmark::Counter(flops * 1e-9 * static_cast<double>(state.iterations()),
                         benchmark::Counter::kIsRate);
  state.SetLabel(l.name);
}
BENCHMARK(BM_ConvBatch68)
    ->ArgsProduct({{1, 3, 4}, {0, 4, 8, 10, 12}})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
