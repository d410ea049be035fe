#include "lddr/network.hpp"

#include <algorithm>
#include <set>

#include "lddr/error.hpp"

namespace lddr {

const char* to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::lrn: return "lrn";
    case LayerKind::maxpool: return "maxpool";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(std::string name, int kernel, int stride, int pad, int out_channels,
                          int groups) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::conv;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  s.out_channels = out_channels;
  s.groups = groups;
  return s;
}

LayerSpec LayerSpec::maxpool(std::string name, int kernel, int stride, int pad, bool ceil_mode) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::maxpool;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  s.ceil_mode = ceil_mode;
  return s;
}

LayerSpec LayerSpec::relu(std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::relu;
  return s;
}

LayerSpec LayerSpec::lrn(std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::lrn;
  return s;
}

void StageConfig::validate() const {
  if (input_size < 1) throw ConfigError("stage config: input size must be positive");
  if (input_channels < 1) throw ConfigError("stage config: input channels must be positive");
  if (layers.empty()) throw ConfigError("stage config: empty layer list");
  if (lrn.size < 1 || lrn.size % 2 == 0 || !(lrn.k > 0.0)) {
    throw ConfigError("stage config: lrn needs an odd positive window and k > 0");
  }
  std::set<std::string> names;
  int channels = input_channels;
  for (const auto& l : layers) {
    if (!names.insert(l.name).second) throw ConfigError("stage config: duplicate layer " + l.name);
    if (l.stride < 1 || l.pad < 0 || l.kernel < 1) {
      throw ConfigError("layer " + l.name + ": requires kernel >= 1, stride >= 1, pad >= 0");
    }
    if (l.kind == LayerKind::conv) {
      if (l.out_channels < 1 || l.groups < 1 || channels % l.groups != 0 ||
          l.out_channels % l.groups != 0) {
        throw ConfigError("layer " + l.name + ": channels not divisible by groups");
      }
      channels = l.out_channels;
    }
  }
}

StageConfig standard_stage_config(int stage, int input_channels) {
  if (stage < 1 || stage > kStageCount) {
    throw ConfigError("stage must be in 1.." + std::to_string(kStageCount) + ", got " +
                      std::to_string(stage));
  }
  // (conv1, max1, conv2, max2) strides per stage.
  static constexpr int kStrides[kStageCount][4] = {
      {4, 2, 1, 1}, {3, 2, 1, 1}, {2, 1, 1, 2}, {1, 1, 1, 1}};
  const auto& s = kStrides[stage - 1];

  StageConfig cfg;
  cfg.stage_index = stage;
  cfg.input_size = kStageInputSizes[stage - 1];
  cfg.input_channels = input_channels;
  cfg.layers = {
      LayerSpec::conv("conv1", 11, s[0], 0, 96),
      LayerSpec::relu("relu1"),
      LayerSpec::lrn("norm1"),
      LayerSpec::maxpool("max1", 3, s[1], 1),
      LayerSpec::conv("conv2", 5, s[2], 0, 256, 2),
      LayerSpec::relu("relu2"),
      LayerSpec::lrn("norm2"),
      LayerSpec::maxpool("max2", 3, s[3], 1),
      LayerSpec::conv("conv3", 3, 1, 0, 384),
      LayerSpec::relu("relu3"),
      LayerSpec::conv("conv4", 3, 1, 0, 384, 2),
      LayerSpec::relu("relu4"),
      LayerSpec::conv("conv5", 3, 1, 0, 256, 2),
  };
  return cfg;
}

std::vector<StageConfig> standard_stage_configs(int input_channels) {
  std::vector<StageConfig> out;
  for (int s = 1; s <= kStageCount; ++s) out.push_back(standard_stage_config(s, input_channels));
  return out;
}

StageConfig original_network_config(int input_channels) {
  StageConfig cfg;
  cfg.stage_index = 0;
  cfg.input_size = 224;
  cfg.input_channels = input_channels;
  cfg.layers = {
      LayerSpec::conv("conv1", 11, 4, 0, 96),
      LayerSpec::relu("relu1"),
      LayerSpec::lrn("norm1"),
      LayerSpec::maxpool("max1", 3, 2, 0),
      LayerSpec::conv("conv2", 5, 1, 2, 256, 2),
      LayerSpec::relu("relu2"),
      LayerSpec::lrn("norm2"),
      LayerSpec::maxpool("max2", 3, 2, 0),
      LayerSpec::conv("conv3", 3, 1, 1, 384),
      LayerSpec::relu("relu3"),
      LayerSpec::conv("conv4", 3, 1, 1, 384, 2),
      LayerSpec::relu("relu4"),
      LayerSpec::conv("conv5", 3, 1, 1, 256, 2),
      LayerSpec::relu("relu5"),
      LayerSpec::maxpool("pool5", 3, 2, 0),
  };
  return cfg;
}

std::vector<LayerGeometry> output_geometry(const StageConfig& cfg) {
  return output_geometry(cfg, cfg.input_size);
}

std::vector<LayerGeometry> output_geometry(const StageConfig& cfg, int input_size) {
  cfg.validate();
  std::vector<LayerGeometry> out;
  out.reserve(cfg.layers.size());
  int h = input_size;
  int w = input_size;
  int c = cfg.input_channels;
  ReceptiveField field;
  for (const auto& l : cfg.layers) {
    if (l.kind == LayerKind::conv) {
      h = conv_output_size(h, l.kernel, l.stride, l.pad);
      w = conv_output_size(w, l.kernel, l.stride, l.pad);
      c = l.out_channels;
    } else if (l.kind == LayerKind::maxpool) {
      h = pool_output_size(h, l.kernel, l.stride, l.pad, l.ceil_mode);
      w = pool_output_size(w, l.kernel, l.stride, l.pad, l.ceil_mode);
    }
    if (l.kind == LayerKind::conv || l.kind == LayerKind::maxpool) {
      field.rf += (l.kernel - 1) * field.jump;
      field.jump *= l.stride;
    }
    if (h < 1 || w < 1) {
      throw GeometryError(l.name, "layer " + l.name + " produces an empty output for input " +
                                      std::to_string(input_size));
    }
    out.push_back({l.name, h, w, c, field.rf, field.jump});
  }
  return out;
}

namespace {

// Smallest input size giving an output of at least `out` through one layer.
int required_input(const LayerSpec& l, int out) {
  switch (l.kind) {
    case LayerKind::conv:
      return std::max(1, (out - 1) * l.stride + l.kernel - 2 * l.pad);
    case LayerKind::maxpool: {
      // ceil((in + 2p - k) / s) + 1 >= out  <=>  in + 2p - k > (out - 2) * s
      int in = l.ceil_mode ? (out - 2) * l.stride + 1 + l.kernel - 2 * l.pad
                           : (out - 1) * l.stride + l.kernel - 2 * l.pad;
      if (out == 1) in = l.kernel - 2 * l.pad;
      return std::max(1, in);
    }
    default:
      return out;
  }
}

bool closes(const StageConfig& cfg, int size) {
  try {
    output_geometry(cfg, size);
    return true;
  } catch (const GeometryError&) {
    return false;
  }
}

}  // namespace

int min_input_size(const StageConfig& cfg) {
  cfg.validate();
  int size = 1;
  for (auto it = cfg.layers.rbegin(); it != cfg.layers.rend(); ++it) {
    size = required_input(*it, size);
  }
  // The inversion ignores the non-empty-last-window rule; settle forward.
  while (!closes(cfg, size)) ++size;
  return size;
}

ReceptiveField receptive_field(std::span<const LayerSpec> layers, std::string_view upto) {
  if (layers.empty()) throw ConfigError("receptive_field: empty layer list");
  ReceptiveField field;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::conv || l.kind == LayerKind::maxpool) {
      field.rf += (l.kernel - 1) * field.jump;
      field.jump *= l.stride;
    }
    if (l.name == upto) return field;
  }
  throw ConfigError("receptive_field: unknown layer '" + std::string(upto) + "'");
}

}  // namespace lddr
