#include "seaclear/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace seaclear {

Grid conv_forward(const Grid& x, const ConvParams& layer, bool relu, ConvCache& cache) {
  cache.input = x;
  cache.pre = conv2d(x, layer);
  return relu ? activation(cache.pre, Activation::relu) : cache.pre;
}

Grid conv_backward(const ConvCache& cache, const ConvParams& layer, bool relu,
                   const Grid& grad_out, ConvParams& grad_layer) {
  const Grid g = relu ? activation_backward(cache.pre, grad_out, Activation::relu) : grad_out;
  ConvGrads grads = conv2d_backward(cache.input, layer, g);
  accumulate(grad_layer, grads);
  return std::move(grads.input);
}

double kink_distance(const ConvCache& cache) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : cache.pre.values()) m = std::min(m, std::abs(v));
  return m;
}

}  // namespace seaclear
