#pragma once

#include <initializer_list>
#include <vector>

#include "seaclear/grid.hpp"

namespace seaclear {

/// Lowest transmission any inversion accepts; division by t below this is
/// treated as ill-conditioned.
inline constexpr double kTransmissionFloor = 0.1;

/// Per-channel ambient water color A, each component in [0, 1]. A single
/// component broadcasts to every image channel.
class BackgroundLight {
 public:
  BackgroundLight() = default;
  explicit BackgroundLight(std::vector<double> values);
  BackgroundLight(std::initializer_list<double> values)
      : BackgroundLight(std::vector<double>(values)) {}

  /// Component for image channel c (broadcast when only one is stored).
  double operator[](int c) const { return values_.size() == 1 ? values_[0] : values_[c]; }
  int channels() const { return static_cast<int>(values_.size()); }
  const std::vector<double>& values() const { return values_; }
  /// Throws DimensionError if this cannot broadcast to `image_channels`.
  void require_channels(int image_channels, const char* what) const;

  friend bool operator==(const BackgroundLight&, const BackgroundLight&) = default;

 private:
  std::vector<double> values_;
};

/// Per-channel attenuation β >= 0; a scalar broadcasts.
class AttenuationCoeff {
 public:
  explicit AttenuationCoeff(std::vector<double> beta);
  AttenuationCoeff(std::initializer_list<double> beta)
      : AttenuationCoeff(std::vector<double>(beta)) {}

  double operator[](int c) const { return beta_.size() == 1 ? beta_[0] : beta_[c]; }
  int channels() const { return static_cast<int>(beta_.size()); }
  const std::vector<double>& values() const { return beta_; }

 private:
  std::vector<double> beta_;
};

/// t(x) = exp(-β d(x)) for a 1-channel depth map. Throws DomainError on
/// negative depth or β.
Grid transmission_from_depth(const Grid& depth, double beta);

/// One transmission channel per β component (`channels` output channels,
/// β broadcast if scalar).
Grid transmission_from_depth(const Grid& depth, const AttenuationCoeff& beta, int channels);

/// Image formation I = J·t + A·(1 - t).
///
/// `t` has either one channel (shared by all image channels) or as many
/// channels as `clear`. Inputs must lie in [0, 1]; DomainError otherwise.
Grid synthesize_hazy(const Grid& clear, const Grid& t, const BackgroundLight& A);

enum class InversionMode {
  oracle,   // exact algebraic inverse, no clamping
  display,  // additionally clamps the result to [0, 1]
};

/// J = (I - A·(1 - t)) / t. Requires t >= kTransmissionFloor everywhere.
Grid invert_direct(const Grid& hazy, const Grid& t, const BackgroundLight& A,
                   InversionMode mode = InversionMode::oracle);

/// Same arithmetic as synthesize_hazy without range checks on the
/// predictions; this is the differentiable re-synthesis used for training.
Grid reconstruct_hazy(const Grid& clear_pred, const Grid& t_pred, const BackgroundLight& A);

struct ReconstructGrads {
  Grid clear;         // ∂/∂J = t
  Grid transmission;  // ∂/∂t = J - A, summed over channels when t is shared
};

ReconstructGrads reconstruct_hazy_backward(const Grid& clear_pred, const Grid& t_pred,
                                           const BackgroundLight& A, const Grid& grad_out);

}  // namespace seaclear
