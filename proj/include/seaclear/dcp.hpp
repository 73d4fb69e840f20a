#pragma once

#include "seaclear/grid.hpp"
#include "seaclear/imaging.hpp"

namespace seaclear {

/// Magnitude floor applied to the (I - 1) denominator of compute_B.
inline constexpr double kBDenominatorFloor = 1e-3;

/// Per pixel: minimum over channels, then minimum over the patch×patch
/// window centred on the pixel. Borders replicate the edge pixels.
/// Throws ParameterError unless patch is odd and positive.
Grid dark_channel(const Grid& image, int patch);

/// Robust estimate of A: among the ceil(fraction·H·W) pixels with the
/// brightest dark channel, return the input pixel with the largest channel
/// sum. Ties at either stage go to the lowest row-major index.
BackgroundLight estimate_background_light(const Grid& image, int patch, double fraction);

/// t = clamp(1 - omega · dark_channel(I / A), kTransmissionFloor, 1).
Grid estimate_transmission_dcp(const Grid& image, const BackgroundLight& A, int patch,
                               double omega);

/// B = ((I - A)/t + (A - 1)) / (I - 1), with |I - 1| floored at
/// kBDenominatorFloor (sign kept, zero treated as negative).
Grid compute_B(const Grid& hazy, const Grid& t, const BackgroundLight& A);

/// J = B·I - B + 1.
Grid recover_clear(const Grid& b_map, const Grid& hazy);

struct RecoverGrads {
  Grid b_map;  // I - 1
  Grid hazy;   // B
};

RecoverGrads recover_clear_backward(const Grid& b_map, const Grid& hazy, const Grid& grad_out);

struct DcpLoss {
  double value = 0.0;
  Grid grad;
};

/// Mean over pixels of |dark_channel(J)|. The subgradient of each pixel's
/// term goes to the element (over channels and window) attaining the
/// minimum, lowest row-major index on ties.
DcpLoss dcp_loss(const Grid& clear_pred, int patch);

/// How far dcp_loss is from a non-smooth point: the smallest, over pixels,
/// of the gap between the two lowest distinct candidates in the window and
/// the distance of the minimum from zero.
double dcp_margin(const Grid& clear_pred, int patch);

}  // namespace seaclear
