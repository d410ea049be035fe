#include "lddr/engine.hpp"

#include <algorithm>
#include <atomic>
#include <string>

#include "lddr/error.hpp"
#include "lddr/parallel.hpp"

namespace lddr {

namespace {

std::atomic<std::size_t> g_weight_allocations{0};

void check_patch(const Tensor& patch, const StageConfig& stage) {
  if (patch.height() != stage.input_size || patch.width() != stage.input_size) {
    throw GeometryError("stage " + std::to_string(stage.stage_index) + " expects a " +
                        std::to_string(stage.input_size) + "x" + std::to_string(stage.input_size) +
                        " patch, got " + std::to_string(patch.height()) + "x" +
                        std::to_string(patch.width()));
  }
  if (patch.channels() != stage.input_channels) {
    throw ConfigError("stage " + std::to_string(stage.stage_index) + " expects " +
                      std::to_string(stage.input_channels) + " channels, got " +
                      std::to_string(patch.channels()));
  }
}

// Runs the layer stack over a batch, one layer at a time, so each conv layer
// is a single GEMM over every patch's pixels.
template <class KernelLookup>
std::vector<Descriptor> run_stage(std::span<const Tensor> patches, const StageConfig& stage,
                                  KernelLookup&& kernel_for) {
  std::vector<Tensor> xs(patches.begin(), patches.end());
  for (const auto& l : stage.layers) {
    switch (l.kind) {
      case LayerKind::conv: xs = kernel_for(l.name).apply_batch(xs, l.stride, l.pad); break;
      case LayerKind::relu:
        for (auto& x : xs) x = relu(x);
        break;
      case LayerKind::lrn:
        for (auto& x : xs) x = lrn(x, stage.lrn);
        break;
      case LayerKind::maxpool:
        for (auto& x : xs) x = maxpool2d(x, l.kernel, l.stride, l.pad, l.ceil_mode);
        break;
    }
  }
  std::vector<Descriptor> out;
  out.reserve(xs.size());
  for (const auto& x : xs) {
    if (x.height() != 1 || x.width() != 1 || x.channels() != kDescriptorSize) {
      throw GeometryError("stage " + std::to_string(stage.stage_index) + " ends in a " +
                          std::to_string(x.height()) + "x" + std::to_string(x.width()) + "x" +
                          std::to_string(x.channels()) + " map, not 1x1x" +
                          std::to_string(kDescriptorSize));
    }
    auto d = x.data();
    out.push_back(Descriptor{{d.begin(), d.end()}});
  }
  return out;
}

void check_batch(std::span<const Tensor> patches, const StageConfig& stage) {
  for (std::size_t i = 0; i < patches.size(); ++i) {
    try {
      check_patch(patches[i], stage);
    } catch (const GeometryError& e) {
      throw GeometryError("patch " + std::to_string(i) + ": " + e.what());
    }
  }
}

// Splits the batch into one contiguous block per worker.
template <class Run>
std::vector<Descriptor> run_blocks(std::span<const Tensor> patches, int threads, Run&& run) {
  const std::size_t workers =
      std::clamp<std::size_t>(threads < 1 ? 1 : static_cast<std::size_t>(threads), 1,
                              std::max<std::size_t>(1, patches.size()));
  std::vector<Descriptor> out(patches.size());
  parallel_for(workers, static_cast<int>(workers), [&](std::size_t w) {
    const std::size_t begin = patches.size() * w / workers;
    const std::size_t end = patches.size() * (w + 1) / workers;
    auto part = run(patches.subspan(begin, end - begin));
    std::move(part.begin(), part.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
  });
  return out;
}

}  // namespace

Descriptor forward_patch(const Tensor& patch, const StageConfig& stage, const WeightSet& weights) {
  weights.check_compatible(stage);
  check_patch(patch, stage);
  return std::move(run_stage(std::span<const Tensor>(&patch, 1), stage, [&](const std::string& name) {
    return ConvKernel(*weights.find(name));
  }).front());
}

std::vector<Descriptor> forward_batch(std::span<const Tensor> patches, const StageConfig& stage,
                                      const WeightSet& weights, int threads) {
  weights.check_compatible(stage);
  check_batch(patches, stage);
  std::map<std::string, ConvKernel, std::less<>> kernels;
  for (const auto& l : stage.layers) {
    if (l.kind == LayerKind::conv) kernels.emplace(l.name, ConvKernel(*weights.find(l.name)));
  }
  return run_blocks(patches, threads, [&](std::span<const Tensor> part) {
    return run_stage(part, stage, [&](const std::string& name) -> const ConvKernel& {
      return kernels.find(name)->second;
    });
  });
}

struct Engine::PackedWeights {
  explicit PackedWeights(const WeightSet& weights) {
    for (const auto& l : weights.layers()) kernels.emplace(l.name, ConvKernel(l.weights));
    g_weight_allocations.fetch_add(1, std::memory_order_relaxed);
  }
  std::map<std::string, ConvKernel, std::less<>> kernels;
};

Engine::Engine(WeightSet weights, std::vector<StageConfig> stages) : weights_(std::move(weights)) {
  weights_.validate();
  if (stages.empty()) throw ConfigError("engine needs at least one stage");
  for (auto& s : stages) {
    weights_.check_compatible(s);
    output_geometry(s);
    const int idx = s.stage_index;
    if (!stages_.emplace(idx, std::move(s)).second) {
      throw ConfigError("engine: stage " + std::to_string(idx) + " registered twice");
    }
  }
  hash_ = weights_.hash();
  packed_ = std::make_shared<const PackedWeights>(weights_);
}

const StageConfig& Engine::stage(int stage_index) const {
  auto it = stages_.find(stage_index);
  if (it == stages_.end()) {
    throw ConfigError("engine: stage " + std::to_string(stage_index) + " is not registered");
  }
  return it->second;
}

Descriptor Engine::forward(int stage_index, const Tensor& patch) const {
  return std::move(forward_batch(stage_index, std::span<const Tensor>(&patch, 1), 1).front());
}

std::vector<Descriptor> Engine::forward_batch(int stage_index, std::span<const Tensor> patches,
                                              int threads) const {
  const auto& cfg = stage(stage_index);
  check_batch(patches, cfg);
  return run_blocks(patches, threads, [&](std::span<const Tensor> part) {
    return run_stage(part, cfg, [&](const std::string& name) -> const ConvKernel& {
      return packed_->kernels.find(name)->second;
    });
  });
}

std::size_t Engine::weight_allocations() noexcept {
  return g_weight_allocations.load(std::memory_order_relaxed);
}

}  // namespace lddr
