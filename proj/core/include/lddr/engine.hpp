#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "lddr/network.hpp"
#include "lddr/tensor.hpp"
#include "lddr/weights.hpp"

namespace lddr {

/// Output of the descriptor network for one patch: kDescriptorSize values.
struct Descriptor {
  std::vector<double> values;

  friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

/// Runs `stage`'s layer stack on one patch with freshly packed weights.
Descriptor forward_patch(const Tensor& patch, const StageConfig& stage, const WeightSet& weights);

/// forward_patch over every element; result i is bit-identical to the serial call.
std::vector<Descriptor> forward_batch(std::span<const Tensor> patches, const StageConfig& stage,
                                      const WeightSet& weights, int threads = 1);

/// All stage networks over a single packed copy of the weights.
class Engine {
 public:
  Engine(WeightSet weights, std::vector<StageConfig> stages);

  Descriptor forward(int stage_index, const Tensor& patch) const;
  std::vector<Descriptor> forward_batch(int stage_index, std::span<const Tensor> patches,
                                        int threads = 1) const;

  const StageConfig& stage(int stage_index) const;
  bool has_stage(int stage_index) const noexcept { return stages_.count(stage_index) != 0; }
  const WeightSet& weights() const noexcept { return weights_; }
  std::uint64_t weights_hash() const noexcept { return hash_; }

  /// Number of packed weight stores ever built, across all engines.
  static std::size_t weight_allocations() noexcept;

 private:
  struct PackedWeights;

  WeightSet weights_;
  std::uint64_t hash_ = 0;
  std::map<int, StageConfig> stages_;
  std::shared_ptr<const PackedWeights> packed_;
};

}  // namespace lddr
