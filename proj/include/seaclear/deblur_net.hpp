#pragma once

#include <array>
#include <string>

#include "seaclear/layers.hpp"
#include "seaclear/params.hpp"

namespace seaclear {

class Rng;

inline constexpr std::array<int, 4> kScaleKernels{1, 3, 5, 7};
inline constexpr int kScaleChannels = 4;

/// Clean image reconstruction module.
///
///   reduce : 1×1 conv shrinking the shared features
///   scales : four parallel same-padded convs (kernels 1, 3, 5, 7; 4 channels
///            each, relu) over the upsampled features
///   fuse   : 3×3 conv from the 16 concatenated channels to B(x), one channel
///            per image channel, no output activation
struct DeblurParams {
  ConvParams reduce;
  std::array<ConvParams, 4> scales;
  ConvParams fuse;

  /// Small random weights and a fuse bias of 1, so B starts close to 1 and
  /// the branch starts close to the identity on the hazy image.
  static DeblurParams create(int feature_channels, int reduce_channels, int image_channels,
                             Rng& rng, double weight_scale = 0.01);
  DeblurParams zeros_like() const;
  /// Enforces the fixed layout above; throws DimensionError otherwise.
  void validate() const;
  void collect(const std::string& prefix, TensorList& out);

  friend bool operator==(const DeblurParams&, const DeblurParams&) = default;
};

struct UpsampleTape {
  ConvCache reduce;
  int reduced_h = 0;
  int reduced_w = 0;
};

/// 1×1 reduce followed by align-corners bilinear resize to out_h×out_w.
Grid upsample_features(const Grid& features, const ConvParams& reduce, int out_h, int out_w,
                       UpsampleTape& tape);
Grid upsample_features_backward(const UpsampleTape& tape, const ConvParams& reduce,
                                const Grid& grad_out, ConvParams& grad_reduce);

struct MultiscaleTape {
  std::array<ConvCache, 4> scales;
  ConvCache fuse;
};

Grid multiscale_B(const Grid& upsampled, const std::array<ConvParams, 4>& scales,
                  const ConvParams& fuse, MultiscaleTape& tape);
Grid multiscale_B_backward(const MultiscaleTape& tape, const std::array<ConvParams, 4>& scales,
                           const ConvParams& fuse, const Grid& grad_b,
                           std::array<ConvParams, 4>& grad_scales, ConvParams& grad_fuse);

/// Output layer: J = B·I - B + 1.
Grid generate_clear(const Grid& b_map, const Grid& hazy);

struct DeblurTape {
  UpsampleTape upsample;
  MultiscaleTape multiscale;
  Grid b_map;
  Grid hazy;
};

/// J_pred = generate_clear(multiscale_B(upsample_features(features)), hazy).
/// Feature height/width must divide the image height/width.
Grid deblur_forward(const Grid& hazy, const Grid& features, const DeblurParams& params);
Grid deblur_forward(const Grid& hazy, const Grid& features, const DeblurParams& params,
                    DeblurTape& tape);

/// Smallest distance of any relu unit in the multi-scale stage from its kink.
double kink_distance(const DeblurTape& tape);

struct DeblurGrads {
  DeblurParams params;
  Grid features;
  Grid hazy;  // through the J = B·I - B + 1 layer only
};

DeblurGrads deblur_backward(const DeblurTape& tape, const DeblurParams& params,
                            const Grid& grad_clear);

}  // namespace seaclear
