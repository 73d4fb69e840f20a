#include "seaclear/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "seaclear/error.hpp"

namespace seaclear {

namespace {

void require_transmission_shape(const Grid& image, const Grid& t, const char* what) {
  if (t.height() != image.height() || t.width() != image.width() ||
      (t.channels() != 1 && t.channels() != image.channels())) {
    throw DimensionError(std::string(what) + ": transmission " + t.shape_string() +
                         " does not fit image " + image.shape_string() +
                         " (needs 1 or matching channels, same height/width)");
  }
}

// Index into t for image channel c.
int t_channel(const Grid& t, int c) { return t.channels() == 1 ? 0 : c; }

void require_unit_range(const Grid& g, const char* what) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] >= 0.0 && g[i] <= 1.0)) {
      throw DomainError(std::string(what) + " value " + std::to_string(g[i]) + " at index " +
                        std::to_string(i) + " outside [0, 1]");
    }
  }
}

Grid blend(const Grid& clear, const Grid& t, const BackgroundLight& A) {
  Grid out = Grid::zeros_like(clear);
  const std::size_t plane = clear.plane_size();
  for (int c = 0; c < clear.channels(); ++c) {
    const double a = A[c];
    const auto tp = t.plane(t_channel(t, c));
    const auto jp = clear.plane(c);
    auto op = out.plane(c);
    for (std::size_t k = 0; k < plane; ++k) op[k] = jp[k] * tp[k] + a * (1.0 - tp[k]);
  }
  return out;
}

}  // namespace

BackgroundLight::BackgroundLight(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw DimensionError("background light needs at least one component");
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("background light component " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

void BackgroundLight::require_channels(int image_channels, const char* what) const {
  if (values_.size() != 1 && static_cast<int>(values_.size()) != image_channels) {
    throw DimensionError(std::string(what) + ": background light has " +
                         std::to_string(values_.size()) + " components for a " +
                         std::to_string(image_channels) + "-channel image");
  }
}

AttenuationCoeff::AttenuationCoeff(std::vector<double> beta) : beta_(std::move(beta)) {
  if (beta_.empty()) throw DimensionError("attenuation needs at least one coefficient");
  for (double b : beta_) {
    if (!(b >= 0.0) || !std::isfinite(b)) {
      throw DomainError("attenuation coefficient " + std::to_string(b) + " must be >= 0");
    }
  }
}

Grid transmission_from_depth(const Grid& depth, double beta) {
  return transmission_from_depth(depth, AttenuationCoeff{beta}, 1);
}

Grid transmission_from_depth(const Grid& depth, const AttenuationCoeff& beta, int channels) {
  if (depth.channels() != 1) {
    throw DimensionError("transmission_from_depth: depth must have 1 channel, got " +
                         depth.shape_string());
  }
  if (beta.channels() != 1 && beta.channels() != channels) {
    throw DimensionError("transmission_from_depth: " + std::to_string(beta.channels()) +
                         " attenuation coefficients for " + std::to_string(channels) +
                         " channels");
  }
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!(depth[i] >= 0.0)) {
      throw DomainError("transmission_from_depth: negative depth " + std::to_string(depth[i]) +
                        " at index " + std::to_string(i));
    }
  }
  Grid t(channels, depth.height(), depth.width());
  for (int c = 0; c < channels; ++c) {
    auto tp = t.plane(c);
    const auto dp = depth.plane(0);
    for (std::size_t k = 0; k < tp.size(); ++k) tp[k] = std::exp(-beta[c] * dp[k]);
  }
  return t;
}

Grid synthesize_hazy(const Grid& clear, const Grid& t, const BackgroundLight& A) {
  require_transmission_shape(clear, t, "synthesize_hazy");
  A.require_channels(clear.channels(), "synthesize_hazy");
  require_unit_range(clear, "synthesize_hazy: clear image");
  require_unit_range(t, "synthesize_hazy: transmission");
  return blend(clear, t, A);
}

Grid invert_direct(const Grid& hazy, const Grid& t, const BackgroundLight& A, InversionMode mode) {
  require_transmission_shape(hazy, t, "invert_direct");
  A.require_channels(hazy.channels(), "invert_direct");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= kTransmissionFloor)) {
      throw DomainError("invert_direct: transmission " + std::to_string(t[i]) + " at index " +
                        std::to_string(i) + " below floor " + std::to_string(kTransmissionFloor));
    }
  }
  Grid out = Grid::zeros_like(hazy);
  for (int c = 0; c < hazy.channels(); ++c) {
    const double a = A[c];
    const auto tp = t.plane(t_channel(t, c));
    const auto ip = hazy.plane(c);
    auto op = out.plane(c);
    for (std::size_t k = 0; k < op.size(); ++k) {
      double j = (ip[k] - a * (1.0 - tp[k])) / tp[k];
      if (mode == InversionMode::display) j = std::clamp(j, 0.0, 1.0);
      op[k] = j;
    }
  }
  return out;
}

Grid reconstruct_hazy(const Grid& clear_pred, const Grid& t_pred, const BackgroundLight& A) {
  require_transmission_shape(clear_pred, t_pred, "reconstruct_hazy");
  A.require_channels(clear_pred.channels(), "reconstruct_hazy");
  return blend(clear_pred, t_pred, A);
}

ReconstructGrads reconstruct_hazy_backward(const Grid& clear_pred, const Grid& t_pred,
                                           const BackgroundLight& A, const Grid& grad_out) {
  require_transmission_shape(clear_pred, t_pred, "reconstruct_hazy_backward");
  require_same_shape(clear_pred, grad_out, "reconstruct_hazy_backward");
  A.require_channels(clear_pred.channels(), "reconstruct_hazy_backward");
  ReconstructGrads g{Grid::zeros_like(clear_pred), Grid::zeros_like(t_pred)};
  for (int c = 0; c < clear_pred.channels(); ++c) {
    const double a = A[c];
    const int tc = t_channel(t_pred, c);
    const auto tp = t_pred.plane(tc);
    const auto jp = clear_pred.plane(c);
    const auto go = grad_out.plane(c);
    auto gj = g.clear.plane(c);
    auto gt = g.transmission.plane(tc);
    for (std::size_t k = 0; k < go.size(); ++k) {
      gj[k] = go[k] * tp[k];
      gt[k] += go[k] * (jp[k] - a);
    }
  }
  return g;
}

}  // namespace seaclear
