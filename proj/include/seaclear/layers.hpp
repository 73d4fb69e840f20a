#pragma once

#include "seaclear/ops.hpp"

namespace seaclear {

/// Tape entry for a convolution optionally followed by relu.
struct ConvCache {
  Grid input;
  Grid pre;  // conv output before the activation
};

Grid conv_forward(const Grid& x, const ConvParams& layer, bool relu, ConvCache& cache);

/// Backward of conv_forward. Adds the layer gradient into `grad_layer` and
/// returns the gradient with respect to the layer input.
Grid conv_backward(const ConvCache& cache, const ConvParams& layer, bool relu,
                   const Grid& grad_out, ConvParams& grad_layer);

/// Smallest |pre-activation| recorded in the cache, i.e. the distance of the
/// layer from a relu kink. Finite-difference checks need this to exceed the
/// step size.
double kink_distance(const ConvCache& cache);

}  // namespace seaclear
