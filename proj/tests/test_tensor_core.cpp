#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "seaclear/adam.hpp"
#include "seaclear/error.hpp"
#include "seaclear/gradcheck.hpp"
#include "seaclear/ops.hpp"
#include "test_support.hpp"

using namespace seaclear;
using seaclear::testing::random_grid;
using seaclear::testing::randomize;

TEST_CASE("grid construction enforces extents and data length") {
  CHECK_THROWS_AS(Grid(0, 2, 2), DimensionError);
  CHECK_THROWS_AS(Grid(1, 2, 2, std::vector<double>(3)), DimensionError);
  Grid g(2, 3, 4, 1.5);
  CHECK(g.size() == 24);
  CHECK(g(1, 2, 3) == 1.5);
}

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  Rng rng(1);
  Grid x = random_grid(rng, 1, 5, 7);
  ConvParams p = ConvParams::zeros(1, 1, 1, 1);
  p.weights[0] = 1.0;
  CHECK(conv2d(x, p) == x);
}

TEST_CASE("conv2d: 2x2 all-ones kernel sums the patch") {
  Grid x(1, 2, 2, {1, 2, 3, 4});
  ConvParams p = ConvParams::zeros(1, 1, 2, 2);
  std::fill(p.weights.begin(), p.weights.end(), 1.0);
  Grid y = conv2d(x, p);
  REQUIRE(y.channels() == 1);
  REQUIRE(y.height() == 1);
  REQUIRE(y.width() == 1);
  CHECK(y[0] == 10.0);
}

TEST_CASE("conv2d: output shape arithmetic and errors") {
  ConvParams p = ConvParams::zeros(3, 2, 3, 3, 1, 2);
  Grid y = conv2d(Grid(2, 7, 8), p);
  CHECK(y.channels() == 3);
  CHECK(y.height() == (7 + 2 - 3) / 2 + 1);
  CHECK(y.width() == (8 + 2 - 3) / 2 + 1);
  CHECK_THROWS_AS(conv2d(Grid(3, 7, 8), p), DimensionError);
  CHECK_THROWS_AS(conv2d(Grid(2, 1, 8), ConvParams::zeros(1, 2, 3, 3)), DimensionError);
  CHECK_THROWS_AS(ConvParams::same(1, 1, 4), ParameterError);
}

TEST_CASE("conv2d is linear in its input when bias is zero") {
  Rng rng(7);
  ConvParams p = ConvParams::same(3, 2, 3);
  randomize(p, rng);
  std::fill(p.bias.begin(), p.bias.end(), 0.0);
  for (int trial = 0; trial < 10; ++trial) {
    Grid a = random_grid(rng, 2, 6, 6), b = random_grid(rng, 2, 6, 6);
    const double s = rng.uniform(-2, 2), t = rng.uniform(-2, 2);
    Grid mix = a;
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = s * a[i] + t * b[i];
    Grid lhs = conv2d(mix, p);
    Grid ya = conv2d(a, p), yb = conv2d(b, p);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      CHECK(std::abs(lhs[i] - (s * ya[i] + t * yb[i])) < 1e-12);
    }
  }
}

TEST_CASE("conv2d backward matches finite differences") {
  Rng rng(11);
  const Grid x = random_grid(rng, 2, 5, 5);
  ConvParams p = ConvParams::zeros(3, 2, 3, 3);
  randomize(p, rng);
  SUBCASE("padding 0 stride 1, tolerance 1e-6") {}
  SUBCASE("same padding stride 2") {
    ConvParams q = ConvParams::same(3, 2, 3, 2);
    q.weights = p.weights;
    q.bias = p.bias;
    p = q;
  }
  const Grid probe = random_grid(rng, 3, p.output_height(5), p.output_width(5));
  ConvGrads g = conv2d_backward(x, p, probe);

  auto f_input = [&](const Grid& in) { return dot(conv2d(in, p), probe); };
  CHECK(finite_diff_check(f_input, x, g.input, 1e-5) < 1e-6);

  auto f_weights = [&](const std::vector<double>& w) {
    ConvParams q = p;
    q.weights = w;
    return dot(conv2d(x, q), probe);
  };
  CHECK(finite_diff_report(f_weights, p.weights, g.weights, 1e-5).max_rel_error < 1e-6);

  auto f_bias = [&](const std::vector<double>& b) {
    ConvParams q = p;
    q.bias = b;
    return dot(conv2d(x, q), probe);
  };
  CHECK(finite_diff_report(f_bias, p.bias, g.bias, 1e-5).max_rel_error < 1e-6);
}

TEST_CASE("bilinear_upsample") {
  Rng rng(3);
  SUBCASE("same size is the identity") {
    Grid x = random_grid(rng, 2, 3, 4);
    CHECK(bilinear_upsample(x, 3, 4) == x);
  }
  SUBCASE("align-corners midpoint") {
    Grid y = bilinear_upsample(Grid(1, 1, 2, {0.0, 1.0}), 1, 3);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y[2] == 1.0);
  }
  SUBCASE("constant grids stay exactly constant") {
    Grid y = bilinear_upsample(Grid(2, 3, 5, 0.37), 11, 9);
    for (double v : y.values()) CHECK(v == 0.37);
  }
  SUBCASE("corners map to corners") {
    Grid x = random_grid(rng, 1, 3, 4);
    Grid y = bilinear_upsample(x, 7, 10);
    CHECK(y(0, 0, 0) == x(0, 0, 0));
    CHECK(y(0, 6, 9) == x(0, 2, 3));
  }
  SUBCASE("backward matches finite differences") {
    const Grid x = random_grid(rng, 2, 3, 3);
    const Grid probe = random_grid(rng, 2, 7, 5);
    Grid g = bilinear_upsample_backward(probe, 3, 3);
    auto f = [&](const Grid& in) { return dot(bilinear_upsample(in, 7, 5), probe); };
    CHECK(finite_diff_check(f, x, g, 1e-5) < 1e-6);
  }
  CHECK_THROWS_AS(bilinear_upsample(Grid(1, 2, 2), 0, 2), ParameterError);
}

TEST_CASE("activations") {
  Grid neg(1, 2, 3, -0.5);
  const Grid r = activation(neg, Activation::relu);
  for (double v : r.values()) CHECK(v == 0.0);
  CHECK(activation(Grid(1, 1, 1, 0.0), Activation::sigmoid)[0] == 0.5);

  Rng rng(5);
  const Grid x = random_grid(rng, 2, 4, 4, -3, 3);
  const Grid probe = random_grid(rng, 2, 4, 4);
  for (Activation kind : {Activation::sigmoid, Activation::relu}) {
    Grid g = activation_backward(x, probe, kind);
    auto f = [&](const Grid& in) { return dot(activation(in, kind), probe); };
    CHECK(finite_diff_check(f, x, g, 1e-5) < 1e-6);
  }
}

TEST_CASE("dropout") {
  Rng rng(9);
  const Grid x = random_grid(rng, 1, 8, 8);
  CHECK(dropout(x, 0.0, 1, true) == x);
  CHECK(dropout(x, 0.7, 1, false) == x);
  CHECK_THROWS_AS(dropout(x, 1.0, 1, true), ParameterError);
  CHECK_THROWS_AS(dropout(x, -0.1, 1, true), ParameterError);

  SUBCASE("survivor fraction follows the keep probability") {
    Grid ones(1, 100, 1000, 1.0);
    Grid y = dropout(ones, 0.3, 1234, true);
    std::size_t kept = 0;
    for (double v : y.values()) {
      if (v != 0.0) {
        ++kept;
        CHECK(v == doctest::Approx(1.0 / 0.7));
      }
    }
    const double frac = static_cast<double>(kept) / 1e5;
    CHECK(std::abs(frac - 0.7) < 0.01);
  }
  SUBCASE("masks are reproducible and seed dependent") {
    CHECK(dropout(x, 0.3, 42, true) == dropout(x, 0.3, 42, true));
    CHECK_FALSE(dropout(x, 0.3, 42, true) == dropout(x, 0.3, 43, true));
  }
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradients leave parameters unchanged") {
    std::vector<double> p{0.5, -1.0, 2.0}, g(3, 0.0);
    AdamState s(3);
    for (int i = 0; i < 50; ++i) adam_step(p, g, s, 0.01);
    CHECK(p == std::vector<double>{0.5, -1.0, 2.0});
    CHECK(s.step == 50);
  }
  SUBCASE("first step has magnitude close to the learning rate") {
    // m̂ = g, v̂ = g², so Δ = -lr·g/(|g| + ε) = -0.001/(1 + 1e-8).
    std::vector<double> p{0.0}, g{1.0};
    AdamState s(1);
    adam_step(p, g, s, 0.001);
    CHECK(p[0] == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("minimizes x^2") {
    std::vector<double> x{1.0};
    AdamState s(1);
    int steps = 0;
    for (; steps < 2000 && std::abs(x[0]) >= 1e-3; ++steps) {
      std::vector<double> g{2.0 * x[0]};
      adam_step(x, g, s, 0.01);
    }
    CHECK(std::abs(x[0]) < 1e-3);
    CHECK(steps <= 2000);
  }
  SUBCASE("length mismatch") {
    std::vector<double> p(2), g(3);
    AdamState s(2);
    CHECK_THROWS_AS(adam_step(p, g, s, 0.1), DimensionError);
  }
  SUBCASE("zero learning rate is a no-op") {
    std::vector<double> p{0.25, 3.0}, g{1.0, -2.0};
    AdamState s(2);
    adam_step(p, g, s, 0.0);
    CHECK(p == std::vector<double>{0.25, 3.0});
  }
}

TEST_CASE("finite_diff_check") {
  Rng rng(21);
  const Grid x = random_grid(rng, 2, 3, 3);
  auto sum = [](const Grid& g) {
    double s = 0;
    for (double v : g.values()) s += v;
    return s;
  };
  CHECK(finite_diff_check(sum, x, Grid(2, 3, 3, 1.0), 1e-5) < 1e-9);

  auto half_sq = [](const Grid& g) { return 0.5 * dot(g, g); };
  CHECK(finite_diff_check(half_sq, x, x, 1e-5) < 1e-8);

  // Gradient 2x against the true x gives |2x - x| / |2x| = 1/2 per coordinate.
  Grid wrong = x;
  wrong *= 2.0;
  CHECK(finite_diff_check(half_sq, x, wrong, 1e-5) == doctest::Approx(0.5).epsilon(1e-6));

  CHECK_THROWS_AS(finite_diff_check(half_sq, x, x, 0.0), ParameterError);
  auto bad = [](const Grid&) { return std::nan(""); };
  CHECK_THROWS_AS(finite_diff_check(bad, x, x, 1e-5), EvaluationError);
}
