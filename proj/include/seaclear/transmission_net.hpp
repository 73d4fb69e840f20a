#pragma once

#include <array>
#include <string>

#include "seaclear/layers.hpp"
#include "seaclear/params.hpp"

namespace seaclear {

class Rng;

/// Channel widths of the transmission branch.
struct TransNetConfig {
  std::array<int, 4> encoder_channels{8, 16, 32, 32};
  std::array<int, 4> decoder_channels{32, 16, 8, 4};
};

/// Transmission prediction branch: four stride-2 3×3 conv+relu encoder
/// levels, four resize-convolution decoder stages (×2 bilinear upsample,
/// 3×3 conv, relu) and a 1×1 head squashed into [kTransmissionFloor, 1].
struct TransNetParams {
  std::array<ConvParams, 4> encoder;
  std::array<ConvParams, 4> decoder;
  ConvParams head;

  static TransNetParams create(int image_channels, Rng& rng, const TransNetConfig& config = {});
  TransNetParams zeros_like() const;
  /// Throws DimensionError if the layer chain is inconsistent, the encoder
  /// does not halve four times, or the head does not emit one channel.
  void validate() const;
  void collect(const std::string& prefix, TensorList& out);

  friend bool operator==(const TransNetParams&, const TransNetParams&) = default;
};

struct TransNetTape {
  std::array<ConvCache, 4> encoder;
  std::array<ConvCache, 4> decoder;
  ConvCache head;
  Grid transmission;
};

/// Returns the 1-channel transmission map at the input resolution.
/// Height and width must be divisible by 16.
Grid predict_transmission(const Grid& image, const TransNetParams& params);
Grid predict_transmission(const Grid& image, const TransNetParams& params, TransNetTape& tape);

/// Smallest distance of any relu unit from its kink.
double kink_distance(const TransNetTape& tape);

struct TransNetGrads {
  TransNetParams params;
  Grid image;
};

TransNetGrads predict_transmission_backward(const TransNetTape& tape, const TransNetParams& params,
                                            const Grid& grad_t);

}  // namespace seaclear
