#include <cmath>

#include "doctest.h"
#include "lddr/engine.hpp"
#include "lddr/error.hpp"
#include "lddr/weights.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace lddr;

namespace {

const WeightSet& shared_weights() {
  static const WeightSet w = init_random_weights(11, 0.02);
  return w;
}

Tensor random_patch(std::uint64_t seed, int size) {
  Rng rng(seed);
  return oracle::random_tensor(rng, size, size, 3, 0.0, 1.0);
}

// Smooth image: a few random Gaussian blobs per channel.
Tensor smooth_image(Rng& rng, int size) {
  Tensor t(size, size, 3);
  for (int c = 0; c < 3; ++c) {
    for (int b = 0; b < 4; ++b) {
      const double cx = rng.uniform(0, size);
      const double cy = rng.uniform(0, size);
      const double s = rng.uniform(3.0, 8.0);
      const double a = rng.uniform(-0.5, 0.5);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          t(y, x, c) += a * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * s * s));
        }
      }
    }
  }
  return t;
}

Tensor crop(const Tensor& t, int y0, int x0, int size) {
  Tensor out(size, size, t.channels());
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < t.channels(); ++c) out(y, x, c) = t(y0 + y, x0 + x, c);
    }
  }
  return out;
}

double distance(const Descriptor& a, const Descriptor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  }
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("weights") {
  TEST_CASE("random init is deterministic and scaled") {
    const WeightSet a = init_random_weights(5, 0.01);
    const WeightSet b = init_random_weights(5, 0.01);
    const WeightSet c = init_random_weights(6, 0.01);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != c.hash());
    double sum = 0.0, sq = 0.0, worst = 0.0;
    std::size_t n = 0;
    for (const auto& l : a.layers()) {
      for (double v : l.weights.weights) {
        sum += v;
        sq += v * v;
        worst = std::max(worst, std::fabs(v));
        ++n;
      }
      for (double v : l.weights.bias) CHECK(v == 0.0);
    }
    CHECK(std::fabs(sum / n) < 1e-4);
    CHECK(std::sqrt(sq / n) == doctest::Approx(0.01).epsilon(0.01));
    CHECK(worst < 0.01 * 7);
    CHECK_THROWS_AS(init_random_weights(1, 0.0), ConfigError);
  }

  TEST_CASE("layer chain of the standard weights") {
    const WeightSet& w = shared_weights();
    CHECK(w.input_channels() == 3);
    CHECK(w.find("conv3")->in_channels == 256);
    CHECK(w.find("conv5")->out_channels == 256);
    CHECK(w.find("nope") == nullptr);
    CHECK_NOTHROW(w.validate());
    for (int s = 1; s <= 4; ++s) CHECK_NOTHROW(w.check_compatible(standard_stage_config(s)));
    CHECK_THROWS_AS(w.check_compatible(standard_stage_config(1, 1)), ConfigError);
  }

  TEST_CASE("serialisation round trip") {
    const WeightSet& w = shared_weights();
    const std::string bytes = serialize_weights(w);
    CHECK(bytes.substr(0, 8) == "LDDRW001");
    CHECK(deserialize_weights(bytes) == w);
    testing_support::TempDir dir;
    save_weights(w, dir.str("w.bin"));
    CHECK(load_weights(dir.str("w.bin")) == w);
    CHECK_THROWS_AS(load_weights(dir.str("missing.bin")), IoError);
  }

  TEST_CASE("corrupt archives are rejected with a specific kind") {
    const std::string bytes = serialize_weights(init_random_weights(2, 0.01, standard_stage_config(4)));
    auto kind_of = [](const std::string& b) {
      try {
        deserialize_weights(b);
      } catch (const ParseError& e) {
        return e.kind();
      }
      FAIL("no ParseError");
      return ParseErrorKind::bad_token;
    };
    CHECK(kind_of("XXXXXXXX" + bytes.substr(8)) == ParseErrorKind::malformed_header);
    CHECK(kind_of("LDDRW002" + bytes.substr(8)) == ParseErrorKind::unsupported_version);
    CHECK(kind_of(bytes.substr(0, bytes.size() - 3)) == ParseErrorKind::truncated);
    CHECK(kind_of(bytes + "x") == ParseErrorKind::trailing_data);
    CHECK(kind_of("") == ParseErrorKind::truncated);
  }
}

TEST_SUITE("engine") {
  TEST_CASE("descriptor is 256 finite values") {
    const Descriptor d = forward_patch(random_patch(1, 21), standard_stage_config(4),
                                       shared_weights());
    REQUIRE(d.values.size() == 256);
    for (double v : d.values) CHECK(std::isfinite(v));
  }

  TEST_CASE("wrong patch size or channels") {
    const Engine engine(shared_weights(), {standard_stage_config(4)});
    CHECK_THROWS_AS(engine.forward(4, random_patch(1, 22)), GeometryError);
    CHECK_THROWS_AS(engine.forward(4, Tensor(21, 21, 1)), ConfigError);
    CHECK_THROWS_AS(engine.forward(3, random_patch(1, 42)), ConfigError);
    std::vector<Tensor> batch{random_patch(1, 21), random_patch(2, 20)};
    try {
      engine.forward_batch(4, batch);
      FAIL("expected GeometryError");
    } catch (const GeometryError& e) {
      CHECK(std::string(e.what()).find("patch 1") != std::string::npos);
    }
  }

  TEST_CASE("shared engine equals standalone forwards; batches equal serial calls") {
    const std::size_t before = Engine::weight_allocations();
    const Engine engine(shared_weights(), standard_stage_configs());
    CHECK(Engine::weight_allocations() == before + 1);
    for (int s = 1; s <= 4; ++s) {
      const auto& cfg = engine.stage(s);
      std::vector<Tensor> patches;
      for (int i = 0; i < 4; ++i) patches.push_back(random_patch(100 * s + i, cfg.input_size));
      const auto batch = engine.forward_batch(s, patches, 3);
      const auto free_batch = forward_batch(patches, cfg, shared_weights(), 2);
      for (std::size_t i = 0; i < patches.size(); ++i) {
        const Descriptor standalone = forward_patch(patches[i], cfg, shared_weights());
        CHECK(engine.forward(s, patches[i]) == standalone);
        CHECK(batch[i] == standalone);
        CHECK(free_batch[i] == standalone);
      }
    }
    CHECK(Engine::weight_allocations() == before + 1);
  }

  TEST_CASE("16-patch batch equals 16 independent calls") {
    const auto cfg = standard_stage_config(4);
    std::vector<Tensor> patches;
    for (int i = 0; i < 16; ++i) patches.push_back(random_patch(500 + i, 21));
    const auto batch = forward_batch(patches, cfg, shared_weights());
    for (int i = 0; i < 16; ++i) CHECK(batch[i] == forward_patch(patches[i], cfg, shared_weights()));
  }

  TEST_CASE("engine rejects duplicate or incompatible stages") {
    CHECK_THROWS_AS(Engine(shared_weights(), {standard_stage_config(2), standard_stage_config(2)}),
                    ConfigError);
    CHECK_THROWS_AS(Engine(shared_weights(), {}), ConfigError);
    auto tiny = standard_stage_config(4);
    tiny.input_size = 20;
    CHECK_THROWS_AS(Engine(shared_weights(), {tiny}), GeometryError);
  }

  TEST_CASE("descriptors move less under a 1-pixel shift than under a new patch") {
    const Engine engine(shared_weights(), {standard_stage_config(4)});
    Rng rng(2024);
    int wins = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor image = smooth_image(rng, 23);
      const Tensor other = smooth_image(rng, 23);
      const Descriptor base = engine.forward(4, crop(image, 1, 1, 21));
      const Descriptor shifted = engine.forward(4, crop(image, 1, 2, 21));
      const Descriptor unrelated = engine.forward(4, crop(other, 1, 1, 21));
      if (distance(base, shifted) < distance(base, unrelated)) ++wins;
    }
    CHECK(wins >= 90);
  }
}
