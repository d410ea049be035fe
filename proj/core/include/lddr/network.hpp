#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lddr/kernels.hpp"

namespace lddr {

enum class LayerKind { conv, relu, lrn, maxpool };

const char* to_string(LayerKind kind) noexcept;

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int out_channels = 0;  // conv only
  int groups = 1;        // conv only
  bool ceil_mode = false;  // maxpool only

  static LayerSpec conv(std::string name, int kernel, int stride, int pad, int out_channels,
                        int groups = 1);
  static LayerSpec maxpool(std::string name, int kernel, int stride, int pad,
                           bool ceil_mode = true);
  static LayerSpec relu(std::string name);
  static LayerSpec lrn(std::string name);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// One cascade stage's descriptor network: a stride view over the shared weights.
struct StageConfig {
  int stage_index = 1;
  int input_size = 0;
  int input_channels = 3;
  std::vector<LayerSpec> layers;
  LrnParams lrn;

  /// Throws ConfigError on out-of-range layer parameters or duplicate names.
  void validate() const;

  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

inline constexpr int kStageCount = 4;
inline constexpr int kDescriptorSize = 256;
inline constexpr int kDefaultInputChannels = 3;

/// Input patch sizes of the four standard stages.
inline constexpr int kStageInputSizes[kStageCount] = {92, 68, 42, 21};

/// The stride-modified descriptor network for `stage` in 1..4.
StageConfig standard_stage_config(int stage, int input_channels = kDefaultInputChannels);
std::vector<StageConfig> standard_stage_configs(int input_channels = kDefaultInputChannels);

/// The unmodified base network (all original strides and paddings, pool5 kept,
/// fully-connected layers omitted) on a 224 x 224 input.
StageConfig original_network_config(int input_channels = kDefaultInputChannels);

struct LayerGeometry {
  std::string name;
  int out_h = 0;
  int out_w = 0;
  int out_c = 0;
  int rf = 1;
  int jump = 1;

  friend bool operator==(const LayerGeometry&, const LayerGeometry&) = default;
};

/// Per-layer output dimensions and receptive field for `cfg.input_size`.
/// Throws GeometryError naming the first layer whose output would be empty.
std::vector<LayerGeometry> output_geometry(const StageConfig& cfg);

/// As above for an explicit square input size.
std::vector<LayerGeometry> output_geometry(const StageConfig& cfg, int input_size);

/// Smallest square input producing at least a 1x1 map at the last layer.
int min_input_size(const StageConfig& cfg);

struct ReceptiveField {
  int rf = 1;
  int jump = 1;

  friend bool operator==(const ReceptiveField&, const ReceptiveField&) = default;
};

/// rf <- rf + (kernel - 1) * jump, jump <- jump * stride over conv/maxpool
/// layers up to and including `upto`. Throws ConfigError for unknown names.
ReceptiveField receptive_field(std::span<const LayerSpec> layers, std::string_view upto);

}  // namespace lddr
