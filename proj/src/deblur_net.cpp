#include "seaclear/deblur_net.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "seaclear/dcp.hpp"
#include "seaclear/error.hpp"
#include "seaclear/rng.hpp"

namespace seaclear {

DeblurParams DeblurParams::create(int feature_channels, int reduce_channels, int image_channels,
                                  Rng& rng, double weight_scale) {
  DeblurParams p;
  p.reduce = ConvParams::same(reduce_channels, feature_channels, 1);
  p.reduce.init_he(rng);
  for (std::size_t i = 0; i < 4; ++i) {
    p.scales[i] = ConvParams::same(kScaleChannels, reduce_channels, kScaleKernels[i]);
    p.scales[i].init_he(rng);
  }
  p.fuse = ConvParams::same(image_channels, 4 * kScaleChannels, 3);
  for (double& w : p.fuse.weights) w = weight_scale * rng.normal();
  std::fill(p.fuse.bias.begin(), p.fuse.bias.end(), 1.0);
  return p;
}

DeblurParams DeblurParams::zeros_like() const {
  DeblurParams z;
  z.reduce = reduce.zeros_like();
  for (std::size_t i = 0; i < 4; ++i) z.scales[i] = scales[i].zeros_like();
  z.fuse = fuse.zeros_like();
  return z;
}

void DeblurParams::validate() const {
  reduce.validate();
  if (reduce.kernel_h != 1 || reduce.kernel_w != 1 || reduce.stride != 1 || reduce.padding != 0) {
    throw DimensionError("deblur branch: reduce must be a 1x1 stride-1 conv");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const ConvParams& s = scales[i];
    s.validate();
    if (s.kernel_h != kScaleKernels[i] || s.kernel_w != kScaleKernels[i]) {
      throw DimensionError("deblur branch: scale " + std::to_string(i) + " must use a " +
                           std::to_string(kScaleKernels[i]) + "x" +
                           std::to_string(kScaleKernels[i]) + " kernel, got " +
                           std::to_string(s.kernel_h) + "x" + std::to_string(s.kernel_w));
    }
    if (s.out_channels != kScaleChannels) {
      throw DimensionError("deblur branch: scale " + std::to_string(i) + " must have " +
                           std::to_string(kScaleChannels) + " output channels, got " +
                           std::to_string(s.out_channels));
    }
    if (s.in_channels != reduce.out_channels) {
      throw DimensionError("deblur branch: scale " + std::to_string(i) + " expects " +
                           std::to_string(s.in_channels) + " input channels, reduce emits " +
                           std::to_string(reduce.out_channels));
    }
    if (s.stride != 1 || 2 * s.padding + 1 != s.kernel_h) {
      throw DimensionError("deblur branch: scale " + std::to_string(i) +
                           " must be same-padded with stride 1");
    }
  }
  fuse.validate();
  if (fuse.in_channels != 4 * kScaleChannels) {
    throw DimensionError("deblur branch: fuse must take " + std::to_string(4 * kScaleChannels) +
                         " channels, got " + std::to_string(fuse.in_channels));
  }
  if (fuse.kernel_h != 3 || fuse.kernel_w != 3 || fuse.padding != 1 || fuse.stride != 1) {
    throw DimensionError("deblur branch: fuse must be a same-padded 3x3 conv");
  }
}

void DeblurParams::collect(const std::string& prefix, TensorList& out) {
  seaclear::collect(prefix + ".reduce", reduce, out);
  for (std::size_t i = 0; i < 4; ++i) {
    seaclear::collect(prefix + ".scale" + std::to_string(kScaleKernels[i]), scales[i], out);
  }
  seaclear::collect(prefix + ".fuse", fuse, out);
}

Grid upsample_features(const Grid& features, const ConvParams& reduce, int out_h, int out_w,
                       UpsampleTape& tape) {
  Grid reduced = conv_forward(features, reduce, false, tape.reduce);
  tape.reduced_h = reduced.height();
  tape.reduced_w = reduced.width();
  return bilinear_upsample(reduced, out_h, out_w);
}

Grid upsample_features_backward(const UpsampleTape& tape, const ConvParams& reduce,
                                const Grid& grad_out, ConvParams& grad_reduce) {
  const Grid g = bilinear_upsample_backward(grad_out, tape.reduced_h, tape.reduced_w);
  return conv_backward(tape.reduce, reduce, false, g, grad_reduce);
}

Grid multiscale_B(const Grid& upsampled, const std::array<ConvParams, 4>& scales,
                  const ConvParams& fuse, MultiscaleTape& tape) {
  std::vector<Grid> branches;
  branches.reserve(4);
  for (std::size_t i = 0; i < 4; ++i) {
    branches.push_back(conv_forward(upsampled, scales[i], true, tape.scales[i]));
  }
  const Grid stacked = concat_channels(branches);
  return conv_forward(stacked, fuse, false, tape.fuse);
}

Grid multiscale_B_backward(const MultiscaleTape& tape, const std::array<ConvParams, 4>& scales,
                           const ConvParams& fuse, const Grid& grad_b,
                           std::array<ConvParams, 4>& grad_scales, ConvParams& grad_fuse) {
  const Grid g_stacked = conv_backward(tape.fuse, fuse, false, grad_b, grad_fuse);
  Grid g_in;
  for (std::size_t i = 0; i < 4; ++i) {
    const Grid g_branch =
        slice_channels(g_stacked, static_cast<int>(i) * scales[i].out_channels, scales[i].out_channels);
    Grid gi = conv_backward(tape.scales[i], scales[i], true, g_branch, grad_scales[i]);
    if (g_in.empty()) {
      g_in = std::move(gi);
    } else {
      g_in += gi;
    }
  }
  return g_in;
}

Grid generate_clear(const Grid& b_map, const Grid& hazy) { return recover_clear(b_map, hazy); }

Grid deblur_forward(const Grid& hazy, const Grid& features, const DeblurParams& params) {
  DeblurTape tape;
  return deblur_forward(hazy, features, params, tape);
}

Grid deblur_forward(const Grid& hazy, const Grid& features, const DeblurParams& params,
                    DeblurTape& tape) {
  params.validate();
  if (hazy.height() % features.height() != 0 || hazy.width() % features.width() != 0) {
    throw DimensionError("deblur_forward: feature size " + features.shape_string() +
                         " does not divide image size " + hazy.shape_string());
  }
  if (params.fuse.out_channels != hazy.channels()) {
    throw DimensionError("deblur_forward: branch emits " + std::to_string(params.fuse.out_channels) +
                         " channels for a " + std::to_string(hazy.channels()) + "-channel image");
  }
  const Grid up =
      upsample_features(features, params.reduce, hazy.height(), hazy.width(), tape.upsample);
  tape.b_map = multiscale_B(up, params.scales, params.fuse, tape.multiscale);
  tape.hazy = hazy;
  return generate_clear(tape.b_map, hazy);
}

DeblurGrads deblur_backward(const DeblurTape& tape, const DeblurParams& params,
                            const Grid& grad_clear) {
  DeblurGrads g{params.zeros_like(), Grid(), Grid()};
  RecoverGrads rg = recover_clear_backward(tape.b_map, tape.hazy, grad_clear);
  const Grid g_up = multiscale_B_backward(tape.multiscale, params.scales, params.fuse, rg.b_map,
                                          g.params.scales, g.params.fuse);
  g.features = upsample_features_backward(tape.upsample, params.reduce, g_up, g.params.reduce);
  g.hazy = std::move(rg.hazy);
  return g;
}

double kink_distance(const DeblurTape& tape) {
  double m = std::numeric_limits<double>::infinity();
  for (const ConvCache& c : tape.multiscale.scales) m = std::min(m, kink_distance(c));
  return m;
}

}  // namespace seaclear
