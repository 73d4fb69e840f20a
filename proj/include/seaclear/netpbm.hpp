#pragma once

#include <optional>
#include <string>

#include "seaclear/grid.hpp"

namespace seaclear {

/// Binary Netpbm image: P5 (grayscale, one channel) or P6 (RGB, three
/// channels), maxval 1..65535. Samples wider than 8 bits are big-endian.
///
/// Conversion to and from doubles is v = q / maxval on read and
/// q = round_half_away(clamp(v, 0, 1) · maxval) on write, so an image read
/// from disk is written back byte for byte.
struct NetpbmImage {
  Grid pixels;
  int maxval = 255;
  /// Meters per sample unit, from a "# depth-scale=<value>" header comment.
  std::optional<double> depth_scale;
};

NetpbmImage read_netpbm(const std::string& path);
/// Throws IoError when the file cannot be written and DimensionError for
/// channel counts other than 1 or 3.
void write_netpbm(const std::string& path, const NetpbmImage& image);

NetpbmImage decode_netpbm(const std::string& bytes, const std::string& origin = "<memory>");
std::string encode_netpbm(const NetpbmImage& image);

/// Round half away from zero of value · maxval after clamping to [0, 1].
int quantize_sample(double value, int maxval);

/// Depth map in meters from a 1-channel image: sample · depth_scale, with a
/// scale of 1 when the header carries none.
Grid depth_from_image(const NetpbmImage& image);

/// 16-bit grayscale encoding of a depth map in meters with the given scale.
/// Throws DomainError for negative depths or depths beyond 65535 · scale.
NetpbmImage depth_to_image(const Grid& depth, double depth_scale);

}  // namespace seaclear
