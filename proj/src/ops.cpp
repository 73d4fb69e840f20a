#include "seaclear/ops.hpp"

#include <algorithm>
#include <cmath>

#include "seaclear/error.hpp"
#include "seaclear/rng.hpp"

namespace seaclear {

namespace {

// Range of output indices whose tap at kernel offset `k` falls inside [0, in).
// i = o*stride - pad + k, so o in [ceil((pad-k)/stride), floor((in-1+pad-k)/stride)].
void valid_range(int in, int out, int stride, int pad, int k, int& lo, int& hi) {
  const int a = pad - k;
  lo = a <= 0 ? 0 : (a + stride - 1) / stride;
  const int b = in - 1 + pad - k;
  hi = b < 0 ? -1 : std::min(out - 1, b / stride);
}

std::string dims(int c, int h, int w) {
  return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

}  // namespace

ConvParams ConvParams::zeros(int out_channels, int in_channels, int kernel_h, int kernel_w,
                             int padding, int stride) {
  if (out_channels <= 0 || in_channels <= 0 || kernel_h <= 0 || kernel_w <= 0) {
    throw ParameterError("conv layer extents must be positive");
  }
  if (padding < 0) throw ParameterError("conv padding must be nonnegative");
  if (stride <= 0) throw ParameterError("conv stride must be positive");
  ConvParams p;
  p.out_channels = out_channels;
  p.in_channels = in_channels;
  p.kernel_h = kernel_h;
  p.kernel_w = kernel_w;
  p.padding = padding;
  p.stride = stride;
  p.weights.assign(static_cast<std::size_t>(out_channels) * in_channels * kernel_h * kernel_w,
                   0.0);
  p.bias.assign(out_channels, 0.0);
  return p;
}

ConvParams ConvParams::same(int out_channels, int in_channels, int kernel, int stride) {
  if (kernel % 2 == 0) {
    throw ParameterError("same padding needs an odd kernel, got " + std::to_string(kernel));
  }
  return zeros(out_channels, in_channels, kernel, kernel, (kernel - 1) / 2, stride);
}

void ConvParams::init_he(Rng& rng, double gain) {
  const double fan_in = static_cast<double>(in_channels) * kernel_h * kernel_w;
  const double scale = gain * std::sqrt(2.0 / fan_in);
  for (double& w : weights) w = scale * rng.normal();
  std::fill(bias.begin(), bias.end(), 0.0);
}

ConvParams ConvParams::zeros_like() const {
  ConvParams p = *this;
  std::fill(p.weights.begin(), p.weights.end(), 0.0);
  std::fill(p.bias.begin(), p.bias.end(), 0.0);
  return p;
}

void ConvParams::validate() const {
  const std::size_t expected =
      static_cast<std::size_t>(out_channels) * in_channels * kernel_h * kernel_w;
  if (weights.size() != expected) {
    throw DimensionError("conv weights: expected " + std::to_string(expected) + " values for " +
                         std::to_string(out_channels) + "x" + std::to_string(in_channels) + "x" +
                         std::to_string(kernel_h) + "x" + std::to_string(kernel_w) + ", got " +
                         std::to_string(weights.size()));
  }
  if (bias.size() != static_cast<std::size_t>(out_channels)) {
    throw DimensionError("conv bias: expected " + std::to_string(out_channels) + " values, got " +
                         std::to_string(bias.size()));
  }
}

int ConvParams::output_height(int input_height) const {
  return (input_height + 2 * padding - kernel_h) / stride + 1;
}

int ConvParams::output_width(int input_width) const {
  return (input_width + 2 * padding - kernel_w) / stride + 1;
}

ConvParams& ConvParams::operator+=(const ConvParams& other) {
  if (weights.size() != other.weights.size() || bias.size() != other.bias.size()) {
    throw DimensionError("conv accumulation: geometry mismatch");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] += other.weights[i];
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += other.bias[i];
  return *this;
}

Grid conv2d(const Grid& input, const ConvParams& p) {
  p.validate();
  if (input.channels() != p.in_channels) {
    throw DimensionError("conv2d: input channels " + std::to_string(input.channels()) +
                         " != layer in_channels " + std::to_string(p.in_channels));
  }
  const int H = input.height(), W = input.width();
  if (H + 2 * p.padding < p.kernel_h || W + 2 * p.padding < p.kernel_w) {
    throw DimensionError("conv2d: input " + input.shape_string() + " (padding " +
                         std::to_string(p.padding) + ") smaller than kernel " +
                         std::to_string(p.kernel_h) + "x" + std::to_string(p.kernel_w) +
                         " along height/width");
  }
  const int OH = p.output_height(H), OW = p.output_width(W);
  Grid out(p.out_channels, OH, OW);
  for (int o = 0; o < p.out_channels; ++o) {
    double* dst = out.plane(o).data();
    std::fill(dst, dst + out.plane_size(), p.bias[o]);
    for (int i = 0; i < p.in_channels; ++i) {
      const double* src = input.plane(i).data();
      for (int ky = 0; ky < p.kernel_h; ++ky) {
        int oy0, oy1;
        valid_range(H, OH, p.stride, p.padding, ky, oy0, oy1);
        for (int kx = 0; kx < p.kernel_w; ++kx) {
          int ox0, ox1;
          valid_range(W, OW, p.stride, p.padding, kx, ox0, ox1);
          const double w = p.weights[p.weight_index(o, i, ky, kx)];
          if (w == 0.0) continue;
          for (int oy = oy0; oy <= oy1; ++oy) {
            const double* row = src + static_cast<std::ptrdiff_t>(oy * p.stride - p.padding + ky) * W;
            double* orow = dst + static_cast<std::ptrdiff_t>(oy) * OW;
            if (p.stride == 1) {
              const double* s = row - p.padding + kx;
              for (int ox = ox0; ox <= ox1; ++ox) orow[ox] += w * s[ox];
            } else {
              for (int ox = ox0; ox <= ox1; ++ox) {
                orow[ox] += w * row[ox * p.stride - p.padding + kx];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Grid& input, const ConvParams& p, const Grid& grad_out) {
  p.validate();
  if (input.channels() != p.in_channels) {
    throw DimensionError("conv2d_backward: input channels " + std::to_string(input.channels()) +
                         " != layer in_channels " + std::to_string(p.in_channels));
  }
  const int H = input.height(), W = input.width();
  const int OH = p.output_height(H), OW = p.output_width(W);
  if (grad_out.channels() != p.out_channels || grad_out.height() != OH ||
      grad_out.width() != OW) {
    throw DimensionError("conv2d_backward: output gradient " + grad_out.shape_string() +
                         " does not match forward output " + dims(p.out_channels, OH, OW));
  }
  ConvGrads g{Grid::zeros_like(input), std::vector<double>(p.weights.size(), 0.0),
              std::vector<double>(p.bias.size(), 0.0)};
  for (int o = 0; o < p.out_channels; ++o) {
    const double* go = grad_out.plane(o).data();
    double bsum = 0.0;
    for (std::size_t k = 0; k < grad_out.plane_size(); ++k) bsum += go[k];
    g.bias[o] = bsum;
    for (int i = 0; i < p.in_channels; ++i) {
      const double* src = input.plane(i).data();
      double* gin = g.input.plane(i).data();
      for (int ky = 0; ky < p.kernel_h; ++ky) {
        int oy0, oy1;
        valid_range(H, OH, p.stride, p.padding, ky, oy0, oy1);
        for (int kx = 0; kx < p.kernel_w; ++kx) {
          int ox0, ox1;
          valid_range(W, OW, p.stride, p.padding, kx, ox0, ox1);
          const std::size_t wi = p.weight_index(o, i, ky, kx);
          const double w = p.weights[wi];
          double gw = 0.0;
          for (int oy = oy0; oy <= oy1; ++oy) {
            const std::ptrdiff_t row_off =
                static_cast<std::ptrdiff_t>(oy * p.stride - p.padding + ky) * W;
            const double* grow = go + static_cast<std::ptrdiff_t>(oy) * OW;
            if (p.stride == 1) {
              // Separate loops so the input update vectorizes.
              const double* s = src + row_off - p.padding + kx;
              double* gi = gin + row_off - p.padding + kx;
              for (int ox = ox0; ox <= ox1; ++ox) gi[ox] += w * grow[ox];
              for (int ox = ox0; ox <= ox1; ++ox) gw += grow[ox] * s[ox];
            } else {
              for (int ox = ox0; ox <= ox1; ++ox) {
                const std::ptrdiff_t ix = row_off + ox * p.stride - p.padding + kx;
                gw += grow[ox] * src[ix];
                gin[ix] += w * grow[ox];
              }
            }
          }
          g.weights[wi] = gw;
        }
      }
    }
  }
  return g;
}

void accumulate(ConvParams& acc, const ConvGrads& grads) {
  if (acc.weights.size() != grads.weights.size() || acc.bias.size() != grads.bias.size()) {
    throw DimensionError("accumulate: gradient geometry does not match layer");
  }
  for (std::size_t i = 0; i < grads.weights.size(); ++i) acc.weights[i] += grads.weights[i];
  for (std::size_t i = 0; i < grads.bias.size(); ++i) acc.bias[i] += grads.bias[i];
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;  // weight of `hi`
};

// Align-corners source position of output index `o`.
std::vector<Tap> resize_taps(int in, int out) {
  std::vector<Tap> taps(out);
  for (int o = 0; o < out; ++o) {
    const double pos =
        (out == 1 || in == 1) ? 0.0 : static_cast<double>(o) * (in - 1) / (out - 1);
    int lo = static_cast<int>(std::floor(pos));
    lo = std::clamp(lo, 0, in - 1);
    const int hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, pos - lo};
  }
  return taps;
}

}  // namespace

Grid bilinear_upsample(const Grid& input, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ParameterError("bilinear_upsample: output size must be >= 1, got " +
                         std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  if (out_h == input.height() && out_w == input.width()) return input;
  const auto ty = resize_taps(input.height(), out_h);
  const auto tx = resize_taps(input.width(), out_w);
  Grid out(input.channels(), out_h, out_w);
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < out_h; ++y) {
      const double fy = ty[y].frac;
      for (int x = 0; x < out_w; ++x) {
        const double fx = tx[x].frac;
        const double top = (1 - fx) * input(c, ty[y].lo, tx[x].lo) + fx * input(c, ty[y].lo, tx[x].hi);
        const double bot = (1 - fx) * input(c, ty[y].hi, tx[x].lo) + fx * input(c, ty[y].hi, tx[x].hi);
        out(c, y, x) = (1 - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

Grid bilinear_upsample_backward(const Grid& grad_out, int in_h, int in_w) {
  if (grad_out.height() == in_h && grad_out.width() == in_w) return grad_out;
  const auto ty = resize_taps(in_h, grad_out.height());
  const auto tx = resize_taps(in_w, grad_out.width());
  Grid g(grad_out.channels(), in_h, in_w);
  for (int c = 0; c < grad_out.channels(); ++c) {
    for (int y = 0; y < grad_out.height(); ++y) {
      const double fy = ty[y].frac;
      for (int x = 0; x < grad_out.width(); ++x) {
        const double fx = tx[x].frac;
        const double v = grad_out(c, y, x);
        g(c, ty[y].lo, tx[x].lo) += (1 - fy) * (1 - fx) * v;
        g(c, ty[y].lo, tx[x].hi) += (1 - fy) * fx * v;
        g(c, ty[y].hi, tx[x].lo) += fy * (1 - fx) * v;
        g(c, ty[y].hi, tx[x].hi) += fy * fx * v;
      }
    }
  }
  return g;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Grid activation(const Grid& input, Activation kind) {
  Grid out = input;
  for (double& v : out.values()) v = kind == Activation::relu ? (v > 0 ? v : 0.0) : sigmoid(v);
  return out;
}

Grid activation_backward(const Grid& input, const Grid& grad_out, Activation kind) {
  require_same_shape(input, grad_out, "activation_backward");
  Grid g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (kind == Activation::relu) {
      if (!(input[i] > 0)) g[i] = 0.0;
    } else {
      const double s = sigmoid(input[i]);
      g[i] *= s * (1 - s);
    }
  }
  return g;
}

Grid dropout(const Grid& input, double rate, std::uint64_t seed, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return input;
  Grid out = input;
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool keep = unit_double(derive_seed(seed, i)) >= rate;
    out[i] = keep ? out[i] * scale : 0.0;
  }
  return out;
}

}  // namespace seaclear
