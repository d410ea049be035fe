#include <Eigen/QR>
#include <string>

#include "doctest.h"
#include "lddr/cascade.hpp"
#include "lddr/error.hpp"
#include "lddr/synth.hpp"
#include "support/temp_dir.hpp"

using namespace lddr;

namespace {

// Stage 4 only keeps these tests fast: 21x21 patches.
StageConfig small_stage() { return standard_stage_configs()[3]; }

const Engine& small_engine() {
  static const Engine engine(init_random_weights(11, 0.02), {small_stage()});
  return engine;
}

std::vector<TrainingSample> faces(std::uint64_t seed, int count) {
  SynthSpec spec;
  spec.seed = seed;
  spec.count = count;
  std::vector<TrainingSample> out;
  for (int i = 0; i < count; ++i) {
    auto f = synth_face(spec, static_cast<std::size_t>(i));
    out.push_back({std::move(f.image), f.box, std::move(f.shape)});
  }
  return out;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.stage_configs = {small_stage()};
  cfg.schedule.sizes = {21};
  cfg.log = [](std::string_view) {};
  return cfg;
}

}  // namespace

TEST_SUITE("cascade") {
  TEST_CASE("a single face with its mirror is fitted exactly at lambda = 0") {
    const auto data = faces(1, 1);
    TrainConfig cfg = small_config();
    cfg.lambda = 0.0;
    cfg.augment.rotations = 0;
    cfg.perturb_initial = false;
    TrainReport report;
    const CascadeModel model = train_cascade(data, small_engine(), cfg, &report);
    REQUIRE(report.samples == 2);
    REQUIRE(report.stages.size() == 1);
    CHECK(report.stages[0].error_before > 1.0);
    CHECK(report.stages[0].error_after < 1e-6);
    CHECK(model.stage_count() == 1);
    CHECK(model.stages[0].W.rows() == 136);
    CHECK(model.stages[0].W.cols() == 68 * 256 + 1);
  }

  TEST_CASE("predicted increments stay in the span of the training targets") {
    const auto data = faces(2, 2);
    TrainConfig cfg = small_config();
    cfg.lambda = 1.0;
    cfg.keep_targets = true;
    TrainReport report;
    const CascadeModel model = train_cascade(data, small_engine(), cfg, &report);
    REQUIRE(report.targets.size() == 1);
    REQUIRE(report.samples < 136);  // otherwise the span is everything

    const Eigen::MatrixXd basis = report.targets[0].transpose();
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
    const auto probe = faces(99, 3);
    for (const auto& f : probe) {
      PredictTrace trace;
      predict(model, f.image, FaceFrame(f.box), small_engine(), &trace);
      const Eigen::VectorXd& inc = trace.increments.at(0);
      const Eigen::VectorXd coeffs = qr.solve(inc);
      CHECK((basis * coeffs - inc).norm() <= 1e-6 * std::max(1.0, inc.norm()));
      CHECK(inc.norm() > 0.0);
    }
  }

  TEST_CASE("zero regressors return the mean shape") {
    const auto data = faces(3, 1);
    TrainConfig cfg = small_config();
    cfg.lambda = 1.0;
    CascadeModel model = train_cascade(data, small_engine(), cfg);
    model.stages[0].W.setZero();
    PredictTrace trace;
    const Shape out =
        predict_canonical(model, warp_to_canonical(data[0].image, FaceFrame(data[0].box)),
                          small_engine(), &trace);
    CHECK(out == model.mean_shape);
    CHECK(trace.shapes.size() == 2);
  }

  TEST_CASE("training is deterministic and thread-independent") {
    const auto data = faces(4, 2);
    TrainConfig cfg = small_config();
    const CascadeModel a = train_cascade(data, small_engine(), cfg);
    cfg.threads = 3;
    const CascadeModel b = train_cascade(data, small_engine(), cfg);
    CHECK(serialize_model(a) == serialize_model(b));
  }

  TEST_CASE("training input validation") {
    const auto data = faces(5, 1);
    TrainConfig cfg = small_config();
    CHECK_THROWS_AS(train_cascade({}, small_engine(), cfg), InputError);
    cfg.schedule.sizes = {42, 21};
    CHECK_THROWS_AS(train_cascade(data, small_engine(), cfg), ConfigError);
    cfg = small_config();
    cfg.lambda = -1.0;
    CHECK_THROWS_AS(train_cascade(data, small_engine(), cfg), ConfigError);
    cfg = small_config();
    cfg.stage_configs = {standard_stage_configs()[2]};
    CHECK_THROWS_AS(train_cascade(data, small_engine(), cfg), ConfigError);
    cfg = small_config();
    cfg.augment = {false, 0, 0.0};
    CHECK_THROWS_AS(train_cascade(data, small_engine(), cfg), InputError);
  }

  TEST_CASE("model serialization round trip and corruption") {
    const auto data = faces(6, 1);
    TrainConfig cfg = small_config();
    cfg.lambda = 0.5;
    const CascadeModel model = train_cascade(data, small_engine(), cfg);
    const std::string bytes = serialize_model(model);
    const CascadeModel back = deserialize_model(bytes);
    CHECK(serialize_model(back) == bytes);
    CHECK(back.mean_shape == model.mean_shape);
    CHECK(back.stages[0].W == model.stages[0].W);
    CHECK(back.weights_hash == model.weights_hash);

    CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() / 2)), ParseError);
    CHECK_THROWS_AS(deserialize_model(bytes + "x"), ParseError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), ParseError);
    CHECK_THROWS_AS(deserialize_model(""), ParseError);

    testing_support::TempDir dir;
    save_model(model, dir.str("m.bin"));
    CHECK(serialize_model(load_model(dir.str("m.bin"))) == bytes);
    CHECK_THROWS_AS(load_model(dir.str("missing.bin")), IoError);
  }

  TEST_CASE("engine mismatch is rejected") {
    const auto data = faces(7, 1);
    TrainConfig cfg = small_config();
    cfg.lambda = 0.5;
    const CascadeModel model = train_cascade(data, small_engine(), cfg);
    CHECK_NOTHROW(model.check_engine(small_engine()));
    const Engine other(init_random_weights(12, 0.02), {small_stage()});
    CHECK_THROWS_AS(model.check_engine(other), ConfigError);
    CHECK_THROWS_AS(predict(model, data[0].image, FaceFrame(data[0].box), other), ConfigError);
    const Engine missing(init_random_weights(11, 0.02), {standard_stage_configs()[2]});
    CHECK_THROWS_AS(model.check_engine(missing), ConfigError);
  }
}
