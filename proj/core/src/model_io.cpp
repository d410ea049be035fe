#include "binary_io.hpp"
#include "lddr/cascade.hpp"
#include "lddr/error.hpp"

namespace lddr {

namespace {

constexpr std::uint32_t kMaxCount = 1u << 20;

void write_stage(detail::ByteWriter& out, const StageConfig& cfg) {
  out.u32(static_cast<std::uint32_t>(cfg.stage_index));
  out.u32(static_cast<std::uint32_t>(cfg.input_size));
  out.u32(static_cast<std::uint32_t>(cfg.input_channels));
  out.u32(static_cast<std::uint32_t>(cfg.lrn.size));
  out.f64(cfg.lrn.alpha);
  out.f64(cfg.lrn.beta);
  out.f64(cfg.lrn.k);
  out.u32(static_cast<std::uint32_t>(cfg.layers.size()));
  for (const auto& l : cfg.layers) {
    out.str(l.name);
    out.u8(static_cast<std::uint8_t>(l.kind));
    out.u32(static_cast<std::uint32_t>(l.kernel));
    out.u32(static_cast<std::uint32_t>(l.stride));
    out.u32(static_cast<std::uint32_t>(l.pad));
    out.u32(static_cast<std::uint32_t>(l.out_channels));
    out.u32(static_cast<std::uint32_t>(l.groups));
    out.u8(l.ceil_mode ? 1 : 0);
  }
}

int checked(std::uint32_t v, const char* what) {
  if (v > kMaxCount) {
    throw ParseError(ParseErrorKind::malformed_header,
                     std::string("model file: implausible ") + what + " " + std::to_string(v));
  }
  return static_cast<int>(v);
}

StageConfig read_stage(detail::ByteReader& in) {
  StageConfig cfg;
  cfg.stage_index = checked(in.u32(), "stage index");
  cfg.input_size = checked(in.u32(), "input size");
  cfg.input_channels = checked(in.u32(), "input channels");
  cfg.lrn.size = checked(in.u32(), "lrn size");
  cfg.lrn.alpha = in.f64();
  cfg.lrn.beta = in.f64();
  cfg.lrn.k = in.f64();
  const int layers = checked(in.u32(), "layer count");
  for (int i = 0; i < layers; ++i) {
    LayerSpec l;
    l.name = in.str(256);
    const auto kind = in.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::maxpool)) {
      throw ParseError(ParseErrorKind::malformed_header, "model file: unknown layer kind");
    }
    l.kind = static_cast<LayerKind>(kind);
    l.kernel = checked(in.u32(), "kernel");
    l.stride = checked(in.u32(), "stride");
    l.pad = checked(in.u32(), "pad");
    l.out_channels = checked(in.u32(), "channel count");
    l.groups = checked(in.u32(), "group count");
    l.ceil_mode = in.u8() != 0;
    cfg.layers.push_back(std::move(l));
  }
  return cfg;
}

}  // namespace

std::string serialize_model(const CascadeModel& model) {
  model.validate();
  detail::ByteWriter out;
  out.raw(kModelMagic);
  out.u32(static_cast<std::uint32_t>(model.landmark_count));
  out.u32(static_cast<std::uint32_t>(model.stage_count()));
  for (int s : model.schedule.sizes) out.u32(static_cast<std::uint32_t>(s));
  for (const auto& cfg : model.stage_configs) write_stage(out, cfg);
  out.u64(model.weights_hash);
  const auto mean = model.mean_shape.flatten();
  out.f64s(mean.data(), mean.size());
  for (const auto& reg : model.stages) {
    out.f64(reg.lambda);
    out.u32(static_cast<std::uint32_t>(reg.W.rows()));
    out.u32(static_cast<std::uint32_t>(reg.W.cols()));
    // Row-major payload.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = reg.W;
    out.f64s(rows.data(), static_cast<std::size_t>(rows.size()));
  }
  return out.bytes();
}

CascadeModel deserialize_model(std::string_view bytes) {
  detail::ByteReader in(bytes, "model file");
  const auto magic = in.raw(kModelMagic.size());
  if (magic.substr(0, 5) != kModelMagic.substr(0, 5)) {
    throw ParseError(ParseErrorKind::malformed_header, "model file: bad magic");
  }
  if (magic != kModelMagic) {
    throw ParseError(ParseErrorKind::unsupported_version,
                     "model file: version '" + std::string(magic.substr(5)) + "'");
  }
  CascadeModel model;
  model.landmark_count = checked(in.u32(), "landmark count");
  const int stages = checked(in.u32(), "stage count");
  if (model.landmark_count < 1 || model.landmark_count > 100000 || stages < 1 || stages > 64) {
    throw ParseError(ParseErrorKind::malformed_header, "model file: bad landmark or stage count");
  }
  model.schedule.sizes.resize(static_cast<std::size_t>(stages));
  for (auto& s : model.schedule.sizes) s = checked(in.u32(), "patch size");
  for (int t = 0; t < stages; ++t) model.stage_configs.push_back(read_stage(in));
  model.weights_hash = in.u64();
  in.need(static_cast<std::size_t>(2 * model.landmark_count) * sizeof(double));
  std::vector<double> mean(static_cast<std::size_t>(2 * model.landmark_count));
  in.f64s(mean.data(), mean.size());
  model.mean_shape = Shape::unflatten(mean);
  for (int t = 0; t < stages; ++t) {
    StageRegressor reg;
    reg.lambda = in.f64();
    const auto rows = in.u32();
    const auto cols = in.u32();
    if (rows != static_cast<std::uint32_t>(2 * model.landmark_count) ||
        cols != static_cast<std::uint32_t>(model.feature_dim())) {
      throw ParseError(ParseErrorKind::shape_mismatch,
                       "model file: stage " + std::to_string(t + 1) + " regressor is " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
    in.need(static_cast<std::size_t>(rows) * cols * sizeof(double));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(rows, cols);
    in.f64s(w.data(), static_cast<std::size_t>(w.size()));
    reg.W = w;
    model.stages.push_back(std::move(reg));
  }
  in.expect_end();
  try {
    model.validate();
  } catch (const ConfigError& e) {
    throw ParseError(ParseErrorKind::shape_mismatch, std::string("model file: ") + e.what());
  }
  return model;
}

void save_model(const CascadeModel& model, const std::string& path) {
  detail::write_file(path, serialize_model(model));
}

CascadeModel load_model(const std::string& path) {
  return deserialize_model(detail::read_file(path));
}

}  // namespace lddr
