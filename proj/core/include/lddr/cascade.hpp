#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lddr/augment.hpp"
#include "lddr/engine.hpp"
#include "lddr/network.hpp"
#include "lddr/ridge.hpp"
#include "lddr/shape.hpp"

namespace lddr {

/// The trained artifact: mean shape, patch schedule, stage networks and one
/// regressor per stage, tied to the weight set it was trained with.
struct CascadeModel {
  int landmark_count = 0;
  Shape mean_shape;  // canonical frame
  PatchSchedule schedule;
  std::vector<StageConfig> stage_configs;
  std::vector<StageRegressor> stages;
  std::uint64_t weights_hash = 0;

  int stage_count() const noexcept { return static_cast<int>(stages.size()); }
  /// Length of every stage's feature vector, bias included.
  int feature_dim() const noexcept { return landmark_count * kDescriptorSize + 1; }

  void validate() const;
  /// Throws ConfigError unless `engine` carries the same weights and stage networks.
  void check_engine(const Engine& engine) const;
};

/// A face in image coordinates.
struct TrainingSample {
  Tensor image;
  FaceBox box;
  Shape shape;
};

struct TrainConfig {
  std::vector<StageConfig> stage_configs = standard_stage_configs();
  PatchSchedule schedule;
  std::optional<double> lambda;  // unset: cross-validate over lambda_grid
  std::vector<double> lambda_grid = kDefaultLambdaGrid;
  int cv_folds = 5;
  std::uint64_t seed = 0;
  AugmentConfig augment;
  bool perturb_initial = true;
  PerturbConfig perturb;
  int threads = 1;
  bool keep_targets = false;
  std::function<void(std::string_view)> log;
};

struct StageReport {
  int stage = 0;
  double lambda = 0.0;
  double error_before = 0.0;
  double error_after = 0.0;
  std::vector<double> cv_errors;
};

struct TrainReport {
  std::size_t samples = 0;
  double initial_error = 0.0;
  std::vector<StageReport> stages;
  /// Per stage, the N x 2L target matrix (only when keep_targets is set).
  std::vector<Eigen::MatrixXd> targets;
};

/// Feature row for `shape` on a canonical image: per-landmark descriptors plus a
/// trailing constant 1.
Eigen::VectorXd shape_indexed_feature(const Tensor& canonical_image, const Shape& shape,
                                      const Engine& engine, const StageConfig& stage,
                                      int patch_size, int threads = 1);

CascadeModel train_cascade(std::span<const TrainingSample> dataset, const Engine& engine,
                           const TrainConfig& config, TrainReport* report = nullptr);

struct PredictTrace {
  std::vector<Shape> shapes;                // S^0 .. S^T, canonical frame
  std::vector<Eigen::VectorXd> increments;  // W^t Phi^t
};

/// Runs the cascade on an image already in the canonical frame.
Shape predict_canonical(const CascadeModel& model, const Tensor& canonical_image,
                        const Engine& engine, PredictTrace* trace = nullptr, int threads = 1);

/// Aligns the face in `frame`; returns landmarks in image coordinates.
Shape predict(const CascadeModel& model, const Tensor& image, const FaceFrame& frame,
              const Engine& engine, PredictTrace* trace = nullptr, int threads = 1);

inline constexpr std::string_view kModelMagic = "LDDRM001";

std::string serialize_model(const CascadeModel& model);
CascadeModel deserialize_model(std::string_view bytes);
void save_model(const CascadeModel& model, const std::string& path);
CascadeModel load_model(const std::string& path);

}  // namespace lddr
