#include "lddr/cascade.hpp"

#include <iomanip>
#include <iostream>
#include <sstream>

#include "lddr/error.hpp"
#include "lddr/parallel.hpp"

namespace lddr {

void CascadeModel::validate() const {
  if (landmark_count < 1) throw ConfigError("model: landmark count must be positive");
  if (static_cast<int>(mean_shape.size()) != landmark_count) {
    throw ConfigError("model: mean shape has " + std::to_string(mean_shape.size()) +
                      " landmarks, expected " + std::to_string(landmark_count));
  }
  schedule.validate();
  if (stages.empty() || stages.size() != schedule.sizes.size() ||
      stages.size() != stage_configs.size()) {
    throw ConfigError("model: " + std::to_string(stages.size()) + " regressors, " +
                      std::to_string(schedule.sizes.size()) + " schedule entries and " +
                      std::to_string(stage_configs.size()) + " stage configs");
  }
  for (const auto& s : stages) {
    if (s.W.rows() != 2 * landmark_count || s.W.cols() != feature_dim()) {
      throw ConfigError("model: regressor is " + std::to_string(s.W.rows()) + "x" +
                        std::to_string(s.W.cols()) + ", expected " +
                        std::to_string(2 * landmark_count) + "x" + std::to_string(feature_dim()));
    }
    if (!s.W.allFinite()) throw ConfigError("model: non-finite regressor entries");
  }
}

void CascadeModel::check_engine(const Engine& engine) const {
  if (engine.weights_hash() != weights_hash) {
    std::ostringstream msg;
    msg << std::hex << "weight hash mismatch: model expects 0x" << weights_hash << ", engine has 0x"
        << engine.weights_hash();
    throw ConfigError(msg.str());
  }
  for (const auto& cfg : stage_configs) {
    if (!engine.has_stage(cfg.stage_index) || !(engine.stage(cfg.stage_index) == cfg)) {
      throw ConfigError("engine lacks the model's stage " + std::to_string(cfg.stage_index) +
                        " network");
    }
  }
}

Eigen::VectorXd shape_indexed_feature(const Tensor& canonical_image, const Shape& shape,
                                      const Engine& engine, const StageConfig& stage,
                                      int patch_size, int threads) {
  std::vector<Tensor> patches;
  patches.reserve(shape.size());
  for (const auto& p : shape.points()) {
    patches.push_back(extract_patch(canonical_image, p, patch_size, stage.input_size));
  }
  const auto descriptors = engine.forward_batch(stage.stage_index, patches, threads);
  const auto assembled = assemble_features(descriptors, shape.size());
  Eigen::VectorXd out(static_cast<Eigen::Index>(assembled.values.size() + 1));
  std::copy(assembled.values.begin(), assembled.values.end(), out.data());
  out[out.size() - 1] = 1.0;
  return out;
}

namespace {

void default_log(std::string_view msg) { std::cerr << msg << '\n'; }

std::string fmt_error(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

double mean_error(const std::vector<Shape>& a, const std::vector<Shape>& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += mean_point_error(a[i], b[i]);
  return total / static_cast<double>(a.size());
}

}  // namespace

CascadeModel train_cascade(std::span<const TrainingSample> dataset, const Engine& engine,
                           const TrainConfig& config, TrainReport* report) {
  const auto log = config.log ? config.log : default_log;
  config.schedule.validate();
  if (config.stage_configs.empty()) throw ConfigError("training needs at least one stage");
  if (config.schedule.sizes.size() != config.stage_configs.size()) {
    throw ConfigError("schedule has " + std::to_string(config.schedule.sizes.size()) +
                      " entries but " + std::to_string(config.stage_configs.size()) +
                      " stages are configured");
  }
  if (config.lambda && !(*config.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (dataset.empty()) throw InputError("training set is empty");
  const std::size_t landmarks = dataset.front().shape.size();
  if (landmarks == 0) throw InputError("training shapes have no landmarks");
  for (const auto& s : dataset) {
    if (s.shape.size() != landmarks) throw InputError("training set mixes landmark counts");
  }

  CascadeModel model;
  model.landmark_count = static_cast<int>(landmarks);
  model.schedule = config.schedule;
  model.stage_configs = config.stage_configs;
  model.weights_hash = engine.weights_hash();
  for (const auto& cfg : config.stage_configs) {
    if (!engine.has_stage(cfg.stage_index) || !(engine.stage(cfg.stage_index) == cfg)) {
      throw ConfigError("engine lacks training stage " + std::to_string(cfg.stage_index));
    }
  }

  // Augmented variants are rebuilt per stage from the source image instead of
  // being held in memory; they are deterministic in (seed, sample index).
  auto variants = [&](std::size_t i) {
    const FaceFrame frame(dataset[i].box);
    CanonicalSample base{warp_to_canonical(dataset[i].image, frame),
                         frame.to_canonical(dataset[i].shape)};
    return augment(base, Rng::derive(config.seed, i).next(), config.augment);
  };
  const std::size_t per_sample =
      1 + (config.augment.flip ? 1 : 0) + static_cast<std::size_t>(config.augment.rotations);
  const std::size_t n = dataset.size() * per_sample;
  if (n < 2) throw InputError("training needs at least 2 samples after augmentation");

  std::vector<Shape> truth(n);
  parallel_for(dataset.size(), config.threads, [&](std::size_t i) {
    auto v = variants(i);
    for (std::size_t k = 0; k < v.size(); ++k) truth[i * per_sample + k] = std::move(v[k].shape);
  });
  model.mean_shape = mean_shape(truth);

  std::vector<Shape> current(n, model.mean_shape);
  if (config.perturb_initial) {
    const std::uint64_t init_seed = Rng::derive(config.seed, 0x5eed).next();
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = Rng::derive(init_seed, i);
      current[i] = perturb_shape(model.mean_shape, rng, config.perturb);
    }
  }

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};
  rep.samples = n;
  rep.initial_error = mean_error(current, truth);
  log("training on " + std::to_string(n) + " samples, initial error " +
      fmt_error(rep.initial_error));

  const Eigen::Index dim = model.feature_dim();
  const Eigen::Index outputs = 2 * model.landmark_count;
  double previous = rep.initial_error;
  for (std::size_t t = 0; t < config.stage_configs.size(); ++t) {
    const StageConfig& stage = config.stage_configs[t];
    const int patch = config.schedule.sizes[t];

    Eigen::MatrixXd features(static_cast<Eigen::Index>(n), dim);
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(n), outputs);
    parallel_for(dataset.size(), config.threads, [&](std::size_t i) {
      const auto v = variants(i);
      for (std::size_t k = 0; k < v.size(); ++k) {
        const std::size_t row = i * per_sample + k;
        features.row(static_cast<Eigen::Index>(row)) =
            shape_indexed_feature(v[k].image, current[row], engine, stage, patch).transpose();
      }
    });
    for (std::size_t i = 0; i < n; ++i) {
      const auto gt = truth[i].flatten();
      const auto cur = current[i].flatten();
      for (Eigen::Index j = 0; j < outputs; ++j) {
        targets(static_cast<Eigen::Index>(i), j) = gt[j] - cur[j];
      }
    }

    StageReport sr;
    sr.stage = stage.stage_index;
    sr.error_before = previous;
    if (config.lambda) {
      sr.lambda = *config.lambda;
    } else {
      const auto cv = cross_validate_lambda(features, targets, config.lambda_grid, config.cv_folds,
                                            Rng::derive(config.seed, 0xc0 + t).next());
      sr.lambda = cv.lambda;
      sr.cv_errors = cv.errors;
    }
    StageRegressor reg = train_stage(features, targets, sr.lambda);

    const Eigen::MatrixXd increments = features * reg.W.transpose();
    for (std::size_t i = 0; i < n; ++i) {
      auto& pts = current[i].points();
      for (std::size_t l = 0; l < pts.size(); ++l) {
        pts[l].x += increments(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * l));
        pts[l].y += increments(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * l + 1));
      }
    }
    sr.error_after = mean_error(current, truth);
    log("stage " + std::to_string(stage.stage_index) + ": lambda " + fmt_error(sr.lambda) +
        ", error " + fmt_error(sr.error_before) + " -> " + fmt_error(sr.error_after));
    if (!(sr.error_after < sr.error_before)) {
      log("warning: stage " + std::to_string(stage.stage_index) +
          " did not reduce the training error");
    }
    previous = sr.error_after;
    if (config.keep_targets) rep.targets.push_back(std::move(targets));
    rep.stages.push_back(std::move(sr));
    model.stages.push_back(std::move(reg));
  }
  model.validate();
  return model;
}

Shape predict_canonical(const CascadeModel& model, const Tensor& canonical_image,
                        const Engine& engine, PredictTrace* trace, int threads) {
  model.check_engine(engine);
  Shape current = model.mean_shape;
  if (trace) {
    *trace = PredictTrace{};
    trace->shapes.push_back(current);
  }
  for (int t = 0; t < model.stage_count(); ++t) {
    const auto& stage = model.stage_configs[static_cast<std::size_t>(t)];
    const Eigen::VectorXd phi =
        shape_indexed_feature(canonical_image, current, engine, stage,
                              model.schedule.sizes[static_cast<std::size_t>(t)], threads);
    Eigen::VectorXd delta = model.stages[static_cast<std::size_t>(t)].apply(phi);
    auto& pts = current.points();
    for (std::size_t l = 0; l < pts.size(); ++l) {
      pts[l].x += delta[static_cast<Eigen::Index>(2 * l)];
      pts[l].y += delta[static_cast<Eigen::Index>(2 * l + 1)];
    }
    if (trace) {
      trace->shapes.push_back(current);
      trace->increments.push_back(std::move(delta));
    }
  }
  return current;
}

Shape predict(const CascadeModel& model, const Tensor& image, const FaceFrame& frame,
              const Engine& engine, PredictTrace* trace, int threads) {
  model.check_engine(engine);
  const Tensor canonical = warp_to_canonical(image, frame);
  return frame.from_canonical(predict_canonical(model, canonical, engine, trace, threads));
}

}  // namespace lddr
