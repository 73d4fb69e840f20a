#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seaclear/grid.hpp"

namespace seaclear {

class Rng;

/// Weights and geometry of one 2-D convolution layer.
///
/// Weights are laid out [out][in][kh][kw]. Convolution is cross-correlation
/// (no kernel flip) with symmetric zero padding.
struct ConvParams {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int padding = 0;
  int stride = 1;
  std::vector<double> weights;
  std::vector<double> bias;

  /// Zero-initialized layer with explicit geometry.
  static ConvParams zeros(int out_channels, int in_channels, int kernel_h, int kernel_w,
                          int padding = 0, int stride = 1);
  /// Square odd kernel with padding (k-1)/2, so stride 1 keeps the spatial size.
  /// Throws ParameterError for even kernels.
  static ConvParams same(int out_channels, int in_channels, int kernel, int stride = 1);

  /// He-normal weights scaled by `gain`, zero bias.
  void init_he(Rng& rng, double gain = 1.0);
  /// Same geometry, all values zero. Used as a gradient accumulator.
  ConvParams zeros_like() const;
  /// Throws DimensionError when the arrays disagree with the declared geometry.
  void validate() const;

  int output_height(int input_height) const;
  int output_width(int input_width) const;
  std::size_t weight_index(int o, int i, int ky, int kx) const {
    return ((static_cast<std::size_t>(o) * in_channels + i) * kernel_h + ky) * kernel_w + kx;
  }

  ConvParams& operator+=(const ConvParams& other);
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct ConvGrads {
  Grid input;
  std::vector<double> weights;
  std::vector<double> bias;
};

Grid conv2d(const Grid& input, const ConvParams& params);

/// Gradients of sum(grad_out ⊙ conv2d(input, params)) w.r.t. input, weights, bias.
ConvGrads conv2d_backward(const Grid& input, const ConvParams& params, const Grid& grad_out);

/// Adds the weight/bias part of `grads` into `acc` (same geometry as the layer).
void accumulate(ConvParams& acc, const ConvGrads& grads);

/// Align-corners bilinear resize: output corners coincide with input corners.
Grid bilinear_upsample(const Grid& input, int out_h, int out_w);

/// Adjoint of bilinear_upsample; result has the shape of the original input.
Grid bilinear_upsample_backward(const Grid& grad_out, int in_h, int in_w);

enum class Activation { relu, sigmoid };

Grid activation(const Grid& input, Activation kind);

/// Elementwise derivative applied to grad_out; `input` is the pre-activation.
Grid activation_backward(const Grid& input, const Grid& grad_out, Activation kind);

double sigmoid(double x);

/// Inverted dropout. In training mode each element is kept with probability
/// 1 - rate (decided by a counter-based hash of (seed, element index)) and
/// survivors are scaled by 1/(1 - rate). Inference mode is the identity.
/// The op is linear in `input`, so the same call applied to an output
/// gradient is its backward pass.
Grid dropout(const Grid& input, double rate, std::uint64_t seed, bool training);

}  // namespace seaclear
