#include "lddr/weights.hpp"

#include <set>

#include "binary_io.hpp"
#include "lddr/error.hpp"
#include "lddr/rng.hpp"

namespace lddr {

WeightSet::WeightSet(std::vector<NamedConv> layers) : layers_(std::move(layers)) { validate(); }

const ConvWeights* WeightSet::find(std::string_view name) const noexcept {
  for (const auto& l : layers_) {
    if (l.name == name) return &l.weights;
  }
  return nullptr;
}

int WeightSet::input_channels() const {
  if (layers_.empty()) throw ConfigError("weight set is empty");
  return layers_.front().weights.in_channels;
}

void WeightSet::validate() const {
  if (layers_.empty()) throw ConfigError("weight set is empty");
  std::set<std::string> names;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (!names.insert(l.name).second) throw ConfigError("weight set: duplicate layer " + l.name);
    l.weights.validate();
    if (i > 0 && layers_[i - 1].weights.out_channels != l.weights.in_channels) {
      throw ConfigError("weight set: " + layers_[i - 1].name + " emits " +
                        std::to_string(layers_[i - 1].weights.out_channels) + " channels but " +
                        l.name + " expects " + std::to_string(l.weights.in_channels));
    }
  }
  if (layers_.back().weights.out_channels != kDescriptorSize) {
    throw ConfigError("weight set: last layer must emit " + std::to_string(kDescriptorSize) +
                      " channels");
  }
}

void WeightSet::check_compatible(const StageConfig& cfg) const {
  cfg.validate();
  int channels = cfg.input_channels;
  std::size_t convs = 0;
  for (const auto& l : cfg.layers) {
    if (l.kind != LayerKind::conv) continue;
    ++convs;
    const ConvWeights* w = find(l.name);
    if (w == nullptr) throw ConfigError("stage " + std::to_string(cfg.stage_index) +
                                        ": no weights for layer " + l.name);
    if (w->kernel_h != l.kernel || w->kernel_w != l.kernel || w->out_channels != l.out_channels ||
        w->groups != l.groups || w->in_channels != channels) {
      throw ConfigError("stage " + std::to_string(cfg.stage_index) + ": layer " + l.name +
                        " does not match its weights");
    }
    channels = l.out_channels;
  }
  if (convs != layers_.size()) {
    throw ConfigError("stage " + std::to_string(cfg.stage_index) + " uses " +
                      std::to_string(convs) + " of " + std::to_string(layers_.size()) +
                      " weight layers");
  }
}

std::uint64_t WeightSet::hash() const { return detail::fnv1a(serialize_weights(*this)); }

WeightSet init_random_weights(std::uint64_t seed, double scale, const StageConfig& cfg) {
  if (!(scale > 0.0)) throw ConfigError("weight scale must be positive");
  cfg.validate();
  Rng rng(seed);
  std::vector<NamedConv> layers;
  int channels = cfg.input_channels;
  for (const auto& l : cfg.layers) {
    if (l.kind != LayerKind::conv) continue;
    ConvWeights w(l.kernel, l.kernel, channels, l.out_channels, l.groups);
    for (double& v : w.weights) v = rng.normal(0.0, scale);
    layers.push_back({l.name, std::move(w)});
    channels = l.out_channels;
  }
  return WeightSet(std::move(layers));
}

WeightSet init_random_weights(std::uint64_t seed, double scale, int input_channels) {
  return init_random_weights(seed, scale, standard_stage_config(kStageCount, input_channels));
}

std::string serialize_weights(const WeightSet& weights) {
  detail::ByteWriter out;
  out.raw(kWeightMagic);
  out.u32(static_cast<std::uint32_t>(weights.layers().size()));
  for (const auto& [name, w] : weights.layers()) {
    out.str(name);
    out.u32(static_cast<std::uint32_t>(w.out_channels));
    out.u32(static_cast<std::uint32_t>(w.in_channels));
    out.u32(static_cast<std::uint32_t>(w.kernel_h));
    out.u32(static_cast<std::uint32_t>(w.kernel_w));
    out.u32(static_cast<std::uint32_t>(w.groups));
    out.f64s(w.weights.data(), w.weights.size());
    out.f64s(w.bias.data(), w.bias.size());
  }
  return out.bytes();
}

WeightSet deserialize_weights(std::string_view bytes) {
  detail::ByteReader in(bytes, "weight archive");
  const auto magic = in.raw(kWeightMagic.size());
  if (magic.substr(0, 5) != kWeightMagic.substr(0, 5)) {
    throw ParseError(ParseErrorKind::malformed_header, "weight archive: bad magic");
  }
  if (magic != kWeightMagic) {
    throw ParseError(ParseErrorKind::unsupported_version,
                     "weight archive: version '" + std::string(magic.substr(5)) + "'");
  }
  const auto count = in.u32();
  if (count == 0 || count > 64) {
    throw ParseError(ParseErrorKind::malformed_header,
                     "weight archive: implausible layer count " + std::to_string(count));
  }
  std::vector<NamedConv> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedConv layer;
    layer.name = in.str(256);
    std::uint32_t dims[5];
    for (auto& d : dims) d = in.u32();
    for (auto d : dims) {
      if (d == 0 || d > 65536) {
        throw ParseError(ParseErrorKind::shape_mismatch,
                         "weight archive: layer " + layer.name + " has invalid dimension");
      }
    }
    auto& w = layer.weights;
    w.out_channels = static_cast<int>(dims[0]);
    w.in_channels = static_cast<int>(dims[1]);
    w.kernel_h = static_cast<int>(dims[2]);
    w.kernel_w = static_cast<int>(dims[3]);
    w.groups = static_cast<int>(dims[4]);
    if (w.in_channels % w.groups != 0 || w.out_channels % w.groups != 0) {
      throw ParseError(ParseErrorKind::shape_mismatch,
                       "weight archive: layer " + layer.name + " channels not divisible by groups");
    }
    in.need((w.weight_count() + static_cast<std::size_t>(w.out_channels)) * sizeof(double));
    w.weights.resize(w.weight_count());
    in.f64s(w.weights.data(), w.weights.size());
    w.bias.resize(static_cast<std::size_t>(w.out_channels));
    in.f64s(w.bias.data(), w.bias.size());
    layers.push_back(std::move(layer));
  }
  in.expect_end();
  try {
    return WeightSet(std::move(layers));
  } catch (const ConfigError& e) {
    throw ParseError(ParseErrorKind::shape_mismatch, std::string("weight archive: ") + e.what());
  }
}

void save_weights(const WeightSet& weights, const std::string& path) {
  detail::write_file(path, serialize_weights(weights));
}

WeightSet load_weights(const std::string& path) {
  return deserialize_weights(detail::read_file(path));
}

}  // namespace lddr
