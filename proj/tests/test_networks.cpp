#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "seaclear/deblur_net.hpp"
#include "seaclear/error.hpp"
#include "seaclear/gradcheck.hpp"
#include "seaclear/imaging.hpp"
#include "seaclear/transmission_net.hpp"
#include "test_support.hpp"

using namespace seaclear;
using seaclear::testing::random_grid;
using seaclear::testing::randomize;

namespace {

// Gradient check of every parameter tensor in `params` through `loss`.
template <typename Params, typename Loss>
double param_grad_error(Params& params, Params& grads, Loss&& loss) {
  TensorList p, g;
  params.collect("p", p);
  grads.collect("p", g);
  const std::vector<double> x0 = flatten(p);
  auto f = [&](const std::vector<double>& x) {
    Params q = params;
    TensorList qt;
    q.collect("p", qt);
    unflatten(qt, x);
    return loss(q);
  };
  return finite_diff_report(f, x0, flatten(g), 1e-5).max_rel_error;
}

double min_abs(const Grid& g) {
  double m = INFINITY;
  for (double v : g.values()) m = std::min(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("transmission branch: zero weights give a constant map") {
  Rng rng(1);
  TransNetParams p = TransNetParams::create(3, rng);
  for (double& w : p.head.weights) w = 0.0;
  p.head.bias[0] = 0.7;
  const Grid t = predict_transmission(random_grid(rng, 3, 16, 32, 0, 1), p);
  const double expected = kTransmissionFloor + (1 - kTransmissionFloor) * sigmoid(0.7);
  for (double v : t.values()) CHECK(v == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("transmission branch: shape and range contract") {
  Rng rng(2);
  TransNetParams p = TransNetParams::create(3, rng);
  const Grid t = predict_transmission(random_grid(rng, 3, 64, 64, 0, 1), p);
  CHECK(t.channels() == 1);
  CHECK(t.height() == 64);
  CHECK(t.width() == 64);
  // Extreme parameters still land inside [floor, 1].
  for (auto& layer : p.encoder) randomize(layer, rng, 5.0);
  randomize(p.head, rng, 50.0);
  const Grid t2 = predict_transmission(random_grid(rng, 3, 32, 16, 0, 1), p);
  for (double v : t2.values()) {
    CHECK(v >= kTransmissionFloor);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(predict_transmission(Grid(3, 24, 32), p), DimensionError);
}

TEST_CASE("transmission branch: validation") {
  Rng rng(3);
  TransNetParams p = TransNetParams::create(3, rng);
  p.head = ConvParams::same(2, 4, 1);
  CHECK_THROWS_AS(p.validate(), DimensionError);
  TransNetParams q = TransNetParams::create(3, rng);
  q.encoder[1] = ConvParams::same(16, 8, 3, 1);
  CHECK_THROWS_AS(q.validate(), DimensionError);
}

TEST_CASE("transmission branch: gradients match finite differences") {
  // Draw until every relu sits at least 1e-4 from its kink; the central
  // difference is only meaningful where the map is smooth within ±h.
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    CAPTURE(seed);
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng rng(derive_seed(seed, attempt));
      TransNetParams p = TransNetParams::create(3, rng);
      randomize(p.head, rng, 2.0);
      for (auto& layer : p.encoder)
        for (double& b : layer.bias) b = 0.1 * rng.normal();
      for (auto& layer : p.decoder)
        for (double& b : layer.bias) b = 0.1 * rng.normal();
      const Grid img = random_grid(rng, 3, 16, 16, 0, 1);
      const Grid probe = random_grid(rng, 1, 16, 16, 0.5, 1.5);
      TransNetTape tape;
      const Grid t0 = predict_transmission(img, p, tape);
      if (kink_distance(tape) < 1e-4) continue;
      TransNetGrads g = predict_transmission_backward(tape, p, probe);
      // Rounding in t limits f to about 1e-16, so a step of 1e-5 cannot
      // resolve input gradients much below 1e-7 to four digits.
      if (min_abs(g.image) < 1e-6) continue;

      auto f_img = [&](const Grid& x) { return centered_dot(predict_transmission(x, p), t0, probe); };
      CHECK(finite_diff_check(f_img, img, g.image, 1e-5) < 1e-4);

      // 30k parameters: spot check 300 coordinates spread over all tensors.
      TensorList pt, gt;
      p.collect("t", pt);
      g.params.collect("t", gt);
      const std::vector<double> x0 = flatten(pt);
      std::vector<std::size_t> coords;
      for (int k = 0; k < 300; ++k) coords.push_back(rng.below(x0.size()));
      auto f_par = [&](const std::vector<double>& x) {
        TransNetParams q = p;
        TensorList qt;
        q.collect("t", qt);
        unflatten(qt, x);
        return centered_dot(predict_transmission(img, q), t0, probe);
      };
      CHECK(finite_diff_report(f_par, x0, flatten(gt), 1e-5, coords).max_rel_error < 1e-4);
      break;
    }
  }
}

TEST_CASE("deblur branch: layout is enforced") {
  Rng rng(5);
  DeblurParams p = DeblurParams::create(32, 8, 3, rng);
  CHECK_NOTHROW(p.validate());
  DeblurParams bad = p;
  bad.scales[2] = ConvParams::same(4, 8, 3);
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  bad = p;
  bad.scales[0] = ConvParams::same(5, 8, 1);
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  bad = p;
  bad.fuse = ConvParams::same(3, 12, 3);
  CHECK_THROWS_AS(bad.validate(), DimensionError);
}

TEST_CASE("deblur branch: upsample_features") {
  Rng rng(6);
  SUBCASE("identity reduce at output size") {
    const Grid feat = random_grid(rng, 1, 8, 8);
    ConvParams reduce = ConvParams::same(1, 1, 1);
    reduce.weights[0] = 1.0;
    UpsampleTape tape;
    CHECK(upsample_features(feat, reduce, 8, 8, tape) == feat);
  }
  SUBCASE("shape and gradient") {
    const Grid feat = random_grid(rng, 2, 4, 4);
    ConvParams reduce = ConvParams::same(3, 2, 1);
    randomize(reduce, rng);
    UpsampleTape tape;
    const Grid up = upsample_features(feat, reduce, 16, 12, tape);
    CHECK(up.channels() == 3);
    CHECK(up.height() == 16);
    CHECK(up.width() == 12);
    const Grid probe = random_grid(rng, 3, 16, 12);
    ConvParams gr = reduce.zeros_like();
    const Grid gf = upsample_features_backward(tape, reduce, probe, gr);
    auto f = [&](const Grid& x) {
      UpsampleTape t2;
      return dot(upsample_features(x, reduce, 16, 12, t2), probe);
    };
    CHECK(finite_diff_check(f, feat, gf, 1e-5) < 1e-5);
  }
}

TEST_CASE("deblur branch: multiscale_B") {
  Rng rng(7);
  DeblurParams p = DeblurParams::create(4, 3, 3, rng);
  SUBCASE("zero network is its fuse bias") {
    for (auto& s : p.scales) s = s.zeros_like();
    p.fuse = p.fuse.zeros_like();
    p.fuse.bias = {0.3, -1.0, 2.5};
    MultiscaleTape tape;
    const Grid b = multiscale_B(random_grid(rng, 3, 5, 6), p.scales, p.fuse, tape);
    for (int c = 0; c < 3; ++c)
      for (double v : b.plane(c)) CHECK(v == p.fuse.bias[c]);
  }
  SUBCASE("concatenation order is k = 1, 3, 5, 7") {
    // Evaluate each scale alone with an all-zero fuse except for its own slot;
    // the sum over slots must reproduce the full output.
    for (auto& s : p.scales) randomize(s, rng);
    randomize(p.fuse, rng);
    const Grid x = random_grid(rng, 3, 6, 6);
    MultiscaleTape tape;
    const Grid full = multiscale_B(x, p.scales, p.fuse, tape);
    Grid sum(3, 6, 6, 0.0);
    for (int slot = 0; slot < 4; ++slot) {
      ConvParams fuse = p.fuse;
      for (int o = 0; o < 3; ++o)
        for (int i = 0; i < 16; ++i)
          if (i / 4 != slot)
            for (int k = 0; k < 9; ++k) fuse.weights[fuse.weight_index(o, i, k / 3, k % 3)] = 0.0;
      if (slot != 0) std::fill(fuse.bias.begin(), fuse.bias.end(), 0.0);
      ConvCache cache;
      const Grid branch = conv_forward(x, p.scales[slot], true, cache);
      // Rebuild the stacked input with this branch in its slot and zeros elsewhere.
      std::vector<Grid> parts(4, Grid(4, 6, 6, 0.0));
      parts[slot] = branch;
      sum += conv2d(concat_channels(parts), fuse);
    }
    CHECK(max_abs_diff(sum, full) < 1e-12);
  }
  SUBCASE("permuting scales with permuted fuse weights is equivalent") {
    for (auto& s : p.scales) randomize(s, rng);
    randomize(p.fuse, rng);
    const Grid x = random_grid(rng, 3, 6, 6);
    MultiscaleTape tape;
    const Grid full = multiscale_B(x, p.scales, p.fuse, tape);
    // Run the four branches in reverse order and compensate in the fuse layer.
    std::vector<Grid> rev;
    for (int s = 3; s >= 0; --s) {
      ConvCache cache;
      rev.push_back(conv_forward(x, p.scales[s], true, cache));
    }
    ConvParams fuse = p.fuse;
    for (int o = 0; o < 3; ++o)
      for (int i = 0; i < 16; ++i)
        for (int k = 0; k < 9; ++k) {
          const int src_slot = 3 - i / 4;
          fuse.weights[fuse.weight_index(o, i, k / 3, k % 3)] =
              p.fuse.weights[p.fuse.weight_index(o, src_slot * 4 + i % 4, k / 3, k % 3)];
        }
    CHECK(max_abs_diff(conv2d(concat_channels(rev), fuse), full) < 1e-12);
  }
  SUBCASE("gradient") {
    for (auto& s : p.scales) randomize(s, rng);
    randomize(p.fuse, rng);
    const Grid x = random_grid(rng, 3, 8, 8);
    const Grid probe = random_grid(rng, 3, 8, 8);
    MultiscaleTape tape;
    multiscale_B(x, p.scales, p.fuse, tape);
    DeblurParams g = p.zeros_like();
    const Grid gx = multiscale_B_backward(tape, p.scales, p.fuse, probe, g.scales, g.fuse);
    auto f = [&](const Grid& in) {
      MultiscaleTape t2;
      return dot(multiscale_B(in, p.scales, p.fuse, t2), probe);
    };
    CHECK(finite_diff_check(f, x, gx, 1e-5) < 1e-4);
  }
}

TEST_CASE("deblur branch: generate_clear") {
  const Grid I(1, 1, 1, 0.5);
  CHECK(generate_clear(Grid(1, 1, 1, 1.0), I) == I);
  CHECK(generate_clear(Grid(1, 1, 1, 0.0), I)[0] == 1.0);
  CHECK(generate_clear(Grid(1, 1, 1, 1.6), I)[0] == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("deblur branch: end to end") {
  Rng rng(8);
  const Grid hazy = random_grid(rng, 3, 8, 8, 0, 1);
  const Grid feat = random_grid(rng, 5, 2, 2);
  DeblurParams p = DeblurParams::create(5, 4, 3, rng);

  SUBCASE("zero network with fuse bias 1 is the identity") {
    DeblurParams z = p.zeros_like();
    std::fill(z.fuse.bias.begin(), z.fuse.bias.end(), 1.0);
    CHECK(deblur_forward(hazy, feat, z) == hazy);
  }
  SUBCASE("shape") {
    const Grid j = deblur_forward(hazy, feat, p);
    CHECK(j.same_shape(hazy));
    CHECK_THROWS_AS(deblur_forward(hazy, random_grid(rng, 5, 3, 3), p), DimensionError);
  }
  SUBCASE("gradients w.r.t. parameters and features") {
    randomize(p.fuse, rng, 0.3);
    randomize(p.reduce, rng, 0.5);
    for (auto& s : p.scales) randomize(s, rng, 0.5);
    const Grid probe = random_grid(rng, 3, 8, 8);
    DeblurTape tape;
    deblur_forward(hazy, feat, p, tape);
    DeblurGrads g = deblur_backward(tape, p, probe);
    auto f = [&](const Grid& x) { return dot(deblur_forward(hazy, x, p), probe); };
    CHECK(finite_diff_check(f, feat, g.features, 1e-5) < 1e-4);
    const double perr = param_grad_error(
        p, g.params, [&](const DeblurParams& q) { return dot(deblur_forward(hazy, feat, q), probe); });
    CHECK(perr < 1e-4);
  }
}
