#include <cmath>

#include "doctest.h"
#include "lddr/error.hpp"
#include "lddr/kernels.hpp"
#include "support/oracles.hpp"

using namespace lddr;

namespace {

ConvWeights random_weights(Rng& rng, int k, int ic, int oc, int groups) {
  ConvWeights w(k, k, ic, oc, groups);
  for (double& v : w.weights) v = rng.uniform(-1.0, 1.0);
  for (double& v : w.bias) v = rng.uniform(-0.5, 0.5);
  return w;
}

}  // namespace

TEST_SUITE("tensor-ops") {
  TEST_CASE("tensor construction and indexing") {
    Tensor t(2, 3, 4, 1.5);
    CHECK(t.size() == 24);
    CHECK(t.offset(1, 2, 3) == 23);
    t(1, 0, 2) = -2.0;
    CHECK(t.data()[t.offset(1, 0, 2)] == -2.0);
    CHECK(t.pixel(1, 0)[2] == -2.0);
    CHECK(t.all_finite());
    t(0, 0, 0) = std::nan("");
    CHECK_FALSE(t.all_finite());
    CHECK_THROWS_AS(Tensor(0, 3, 1), InputError);
    CHECK_THROWS_AS(Tensor(2, 2, 1, std::vector<double>(3)), InputError);
  }

  TEST_CASE("conv2d matches the loop oracle on the documented instance") {
    Rng rng(3);
    const Tensor in = oracle::random_tensor(rng, 7, 7, 2);
    const ConvWeights w = random_weights(rng, 3, 2, 2, 1);
    const Tensor got = conv2d(in, w, 2, 1);
    CHECK(got.height() == 4);
    CHECK(got.width() == 4);
    CHECK(oracle::max_relative_error(got, oracle::conv2d(in, w, 2, 1)) < 1e-6);
  }

  TEST_CASE("conv2d: 1x1 identity kernel returns the input") {
    Rng rng(5);
    const Tensor in = oracle::random_tensor(rng, 5, 4, 3);
    ConvWeights w(1, 1, 3, 3);
    for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0) = 1.0;
    CHECK(conv2d(in, w, 1, 0) == in);
  }

  TEST_CASE("conv2d: grouped convolution only sees its own channels") {
    Tensor in(3, 3, 4, 0.0);
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) {
        in(y, x, 0) = 1.0;  // group 0
        in(y, x, 3) = 2.0;  // group 1
      }
    }
    ConvWeights w(3, 3, 4, 2, 2);
    std::fill(w.weights.begin(), w.weights.end(), 1.0);
    const Tensor out = conv2d(in, w, 1, 0);
    CHECK(out(0, 0, 0) == doctest::Approx(9.0));
    CHECK(out(0, 0, 1) == doctest::Approx(18.0));
  }

  TEST_CASE("conv2d: 50 seeded random instances match the oracle") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
      const int groups = 1 + static_cast<int>(rng.below(2));
      const int ic = groups * (1 + static_cast<int>(rng.below(2)));
      const int oc = groups * (1 + static_cast<int>(rng.below(2)));
      const int k = 1 + static_cast<int>(rng.below(4));
      const int stride = 1 + static_cast<int>(rng.below(3));
      const int pad = static_cast<int>(rng.below(3));
      const int h = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(10 - k)));
      const int wd = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(10 - k)));
      const Tensor in = oracle::random_tensor(rng, h, wd, ic);
      const ConvWeights w = random_weights(rng, k, ic, oc, groups);
      CAPTURE(trial);
      CHECK(oracle::max_relative_error(conv2d(in, w, stride, pad),
                                       oracle::conv2d(in, w, stride, pad)) < 1e-6);
    }
  }

  TEST_CASE("conv2d: batched application is bit-identical to single application") {
    Rng rng(7);
    const ConvWeights w = random_weights(rng, 3, 4, 40, 2);
    const ConvKernel kernel(w);
    std::vector<Tensor> inputs;
    for (int i = 0; i < 13; ++i) inputs.push_back(oracle::random_tensor(rng, 9, 9, 4));
    const auto batch = kernel.apply_batch(inputs, 1, 1);
    REQUIRE(batch.size() == inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) CHECK(batch[i] == kernel.apply(inputs[i], 1, 1));
  }

  TEST_CASE("conv2d errors") {
    ConvWeights w(3, 3, 2, 2);
    CHECK_THROWS_AS(conv2d(Tensor(5, 5, 3), w, 1, 0), ConfigError);
    CHECK_THROWS_AS(conv2d(Tensor(2, 2, 2), w, 1, 0), GeometryError);
    CHECK_THROWS_AS(conv2d(Tensor(5, 5, 2), w, 0, 0), ConfigError);
    CHECK_THROWS_AS(ConvWeights(3, 3, 3, 2, 2), ConfigError);
    CHECK(conv_output_size(5, 3, 2, 1) == 3);
    CHECK(conv_output_size(2, 3, 1, 0) == 0);
  }

  TEST_CASE("relu") {
    Tensor t(1, 1, 3, std::vector<double>{-1.0, 0.0, 2.5});
    const Tensor r = relu(t);
    CHECK(r.data()[0] == 0.0);
    CHECK(r.data()[1] == 0.0);
    CHECK(r.data()[2] == 2.5);
  }

  TEST_CASE("lrn: documented instance and 50 random instances") {
    Rng rng(11);
    const Tensor one = oracle::random_tensor(rng, 1, 1, 5);
    CHECK(oracle::max_relative_error(lrn(one, {5, 1e-4, 0.75, 2.0}),
                                     oracle::lrn(one, 5, 1e-4, 0.75, 2.0)) < 1e-6);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 1 + 2 * static_cast<int>(rng.below(3));
      const double alpha = rng.uniform(1e-4, 1.0);
      const double beta = trial % 2 ? 0.75 : rng.uniform(0.25, 1.0);
      const double k = rng.uniform(0.5, 2.0);
      const Tensor in = oracle::random_tensor(rng, 1 + static_cast<int>(rng.below(9)),
                                              1 + static_cast<int>(rng.below(9)),
                                              1 + static_cast<int>(rng.below(6)), -3.0, 3.0);
      CAPTURE(trial);
      CHECK(oracle::max_relative_error(lrn(in, {n, alpha, beta, k}),
                                       oracle::lrn(in, n, alpha, beta, k)) < 1e-6);
    }
  }

  TEST_CASE("lrn rejects bad parameters") {
    CHECK_THROWS_AS(lrn(Tensor(1, 1, 4), {4, 1e-4, 0.75, 2.0}), ConfigError);
    CHECK_THROWS_AS(lrn(Tensor(1, 1, 4), {0, 1e-4, 0.75, 2.0}), ConfigError);
    CHECK_THROWS_AS(lrn(Tensor(1, 1, 4), {5, 1e-4, 0.75, 0.0}), ConfigError);
  }

  TEST_CASE("maxpool2d: ceil mode, padding and random instances") {
    Tensor t(4, 4, 1);
    for (int i = 0; i < 16; ++i) t.data()[static_cast<std::size_t>(i)] = i;
    const Tensor floor_mode = maxpool2d(t, 3, 2, 0, false);
    const Tensor ceil_mode = maxpool2d(t, 3, 2, 0, true);
    CHECK(floor_mode.height() == 1);
    CHECK(ceil_mode.height() == 2);
    CHECK(ceil_mode(1, 1, 0) == 15.0);

    // Padding never wins over negative inputs.
    Tensor neg(2, 2, 1, -5.0);
    CHECK(maxpool2d(neg, 3, 1, 1, false)(0, 0, 0) == -5.0);

    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      const int k = 1 + static_cast<int>(rng.below(3));
      const int stride = 1 + static_cast<int>(rng.below(3));
      const int pad = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
      const bool ceil = rng.below(2) == 1;
      const Tensor in = oracle::random_tensor(rng, k + static_cast<int>(rng.below(7)),
                                              k + static_cast<int>(rng.below(7)),
                                              1 + static_cast<int>(rng.below(4)));
      CAPTURE(trial);
      CHECK(oracle::max_relative_error(maxpool2d(in, k, stride, pad, ceil),
                                       oracle::maxpool2d(in, k, stride, pad, ceil)) < 1e-6);
    }
    CHECK_THROWS_AS(maxpool2d(Tensor(2, 2, 1), 3, 1, 0, false), GeometryError);
  }

  TEST_CASE("kernels keep finite input finite") {
    Rng rng(17);
    const Tensor in = oracle::random_tensor(rng, 8, 8, 4, -1e3, 1e3);
    const ConvWeights w = random_weights(rng, 3, 4, 4, 1);
    CHECK(conv2d(in, w, 1, 1).all_finite());
    CHECK(relu(in).all_finite());
    CHECK(lrn(in).all_finite());
    CHECK(maxpool2d(in, 3, 2, 1, true).all_finite());
  }
}
