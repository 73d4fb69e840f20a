#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "seaclear/layers.hpp"
#include "seaclear/params.hpp"

namespace seaclear {

class Rng;

/// Smallest projective denominator z accepted anywhere on a target grid.
inline constexpr double kHorizonGuard = 1e-3;

/// Eight-parameter perspective transform with θ33 fixed to 1:
///
///   (x, y, z)ᵀ = [[θ11 θ12 θ13] [θ21 θ22 θ23] [θ31 θ32 1]] · (x_t, y_t, 1)ᵀ
///   source = (x / z, y / z)
///
/// Coordinates are normalized to [-1, 1] with align-corners semantics.
struct Homography {
  std::array<double, 8> theta{1, 0, 0, 0, 1, 0, 0, 0};

  static Homography identity() { return {}; }
  /// Embeds an affine (θ11 θ12 θ13 θ21 θ22 θ23) with θ31 = θ32 = 0.
  static Homography from_affine(const std::array<double, 6>& affine);
  /// Divides a 3×3 row-major matrix by its bottom-right entry. Throws
  /// SingularTransformError when that entry is below kHorizonGuard.
  static Homography from_matrix(const std::array<double, 9>& m);

  std::array<double, 9> matrix() const;
  double determinant() const;
  /// Maps one normalized target point to its source point (no guard).
  std::pair<double, double> map(double x, double y) const;

  friend bool operator==(const Homography&, const Homography&) = default;
};

/// normalize(a · b): the map that applies b first, then a.
Homography compose(const Homography& a, const Homography& b);
/// normalize(Θ⁻¹); throws SingularTransformError for a singular matrix or an
/// inverse whose bottom-right entry is below the guard.
Homography inverse(const Homography& h);

/// Source coordinates for every target pixel, stored as interleaved (x, y)
/// pairs in row-major target order.
struct SamplingGrid {
  int height = 0;
  int width = 0;
  std::vector<double> coords;

  SamplingGrid() = default;
  SamplingGrid(int h, int w) : height(h), width(w), coords(2 * static_cast<std::size_t>(h) * w, 0.0) {}

  double& x(int i, int j) { return coords[2 * (static_cast<std::size_t>(i) * width + j)]; }
  double& y(int i, int j) { return coords[2 * (static_cast<std::size_t>(i) * width + j) + 1]; }
  double x(int i, int j) const { return coords[2 * (static_cast<std::size_t>(i) * width + j)]; }
  double y(int i, int j) const { return coords[2 * (static_cast<std::size_t>(i) * width + j) + 1]; }

  friend bool operator==(const SamplingGrid&, const SamplingGrid&) = default;
};

/// Normalized align-corners coordinate of pixel `index` along an axis of
/// `extent` pixels: -1 at the first pixel centre, +1 at the last (0 if the
/// axis has a single pixel).
double normalized_coord(int index, int extent);

/// Grid generator. Throws SingularTransformError if the matrix is singular
/// or z < kHorizonGuard at any target pixel.
SamplingGrid make_grid(const Homography& h, int out_h, int out_w);

/// Classical affine grid generator (z ≡ 1). Bitwise equal to
/// make_grid(Homography::from_affine(affine)).
SamplingGrid affine_grid(const std::array<double, 6>& affine, int out_h, int out_w);

/// Gradient of sum(grad_grid ⊙ make_grid(h)) with respect to the 8 parameters.
std::array<double, 8> make_grid_backward(const Homography& h, const SamplingGrid& grad_grid);

/// Bilinear sampler with zero padding: out(c, i, j) blends the four pixels
/// around the source point; neighbours outside the input contribute zero.
Grid bilinear_sample(const Grid& input, const SamplingGrid& grid);

struct SampleGrads {
  Grid input;
  SamplingGrid grid;
};

SampleGrads bilinear_sample_backward(const Grid& input, const SamplingGrid& grid,
                                     const Grid& grad_out);

enum class StnMode { none, affine, perspective };

StnMode parse_stn_mode(const std::string& name);
std::string to_string(StnMode mode);

/// Bound on each learned perspective parameter. With |θ31| + |θ32| <= 0.9
/// the denominator z stays >= 0.1 on the whole target grid, so a trained
/// localization network can never reach the horizon guard.
inline constexpr double kPerspectiveBound = 0.45;

/// Localization network: conv 3×3/2 + relu, conv 3×3/2 + relu, and a fully
/// connected layer (a conv whose kernel covers the whole map) emitting the
/// eight homography parameters. The last two outputs pass through
/// kPerspectiveBound · tanh; the six affine ones are used as is.
struct LocParams {
  ConvParams conv1;
  ConvParams conv2;
  ConvParams fc;

  /// Random conv weights, zero fc weights and identity fc bias, so a fresh
  /// network returns the identity transform for every input.
  static LocParams create(int in_channels, int in_h, int in_w, Rng& rng, int hidden1 = 8,
                          int hidden2 = 16);
  LocParams zeros_like() const;
  void collect(const std::string& prefix, TensorList& out);

  friend bool operator==(const LocParams&, const LocParams&) = default;
};

struct LocTape {
  ConvCache conv1;
  ConvCache conv2;
  ConvCache fc;
};

/// Requires height and width >= 4.
Homography localize(const Grid& features, const LocParams& params);
Homography localize(const Grid& features, const LocParams& params, LocTape& tape);

/// Smallest distance of any relu unit in the two conv layers from its kink.
double kink_distance(const LocTape& tape);

struct LocGrads {
  LocParams params;
  Grid features;
};

LocGrads localize_backward(const LocTape& tape, const LocParams& params,
                           const std::array<double, 8>& grad_theta);

struct StnTape {
  StnMode mode = StnMode::perspective;
  LocTape loc;
  Homography transform;
  SamplingGrid grid;
  Grid input;
};

/// V = bilinear_sample(U, grid(localize(U))). In affine mode θ31 and θ32
/// are pinned to zero and the affine generator is used; mode none is the
/// identity.
Grid stn_forward(const Grid& features, const LocParams& params, StnMode mode = StnMode::perspective);
Grid stn_forward(const Grid& features, const LocParams& params, StnMode mode, StnTape& tape);

struct StnGrads {
  LocParams params;
  Grid features;
};

StnGrads stn_backward(const StnTape& tape, const LocParams& params, const Grid& grad_out);

}  // namespace seaclear
