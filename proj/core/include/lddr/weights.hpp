#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lddr/kernels.hpp"
#include "lddr/network.hpp"

namespace lddr {

struct NamedConv {
  std::string name;
  ConvWeights weights;

  friend bool operator==(const NamedConv&, const NamedConv&) = default;
};

/// The convolution weights shared by every stage, keyed by layer name.
class WeightSet {
 public:
  WeightSet() = default;
  explicit WeightSet(std::vector<NamedConv> layers);

  const std::vector<NamedConv>& layers() const noexcept { return layers_; }
  /// nullptr when absent.
  const ConvWeights* find(std::string_view name) const noexcept;
  int input_channels() const;

  /// Channel chain consistency; the last layer must emit the descriptor width.
  void validate() const;

  /// Throws ConfigError when `cfg`'s conv layers disagree with these weights.
  void check_compatible(const StageConfig& cfg) const;

  /// FNV-1a of the serialized archive.
  std::uint64_t hash() const;

  friend bool operator==(const WeightSet&, const WeightSet&) = default;

 private:
  std::vector<NamedConv> layers_;
};

/// Weights for the conv layers of `cfg` drawn from N(0, scale^2); zero biases.
WeightSet init_random_weights(std::uint64_t seed, double scale, const StageConfig& cfg);
/// Same, for the standard descriptor network.
WeightSet init_random_weights(std::uint64_t seed, double scale,
                              int input_channels = kDefaultInputChannels);

inline constexpr std::string_view kWeightMagic = "LDDRW001";

std::string serialize_weights(const WeightSet& weights);
WeightSet deserialize_weights(std::string_view bytes);
void save_weights(const WeightSet& weights, const std::string& path);
WeightSet load_weights(const std::string& path);

}  // namespace lddr
