#include "seaclear/netpbm.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "seaclear/error.hpp"

namespace seaclear {

namespace {

constexpr const char* kDepthTag = "depth-scale=";

class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(origin_ + ": " + what);
  }

  // Skips whitespace and comments, remembering a depth-scale comment.
  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        const std::size_t end = bytes_.find('\n', pos_);
        const std::string comment = bytes_.substr(pos_ + 1, end == std::string::npos ? end : end - pos_ - 1);
        parse_comment(comment);
        pos_ = end == std::string::npos ? bytes_.size() : end + 1;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  int read_int(const char* field) {
    skip_space();
    long long v = 0;
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000) fail(std::string("header ") + field + " too large");
      ++pos_;
    }
    if (pos_ == start) fail(std::string("malformed header, expected ") + field);
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates the header from the raster.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      fail("malformed header, missing whitespace before raster");
    }
    ++pos_;
  }

  std::size_t position() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  const std::optional<double>& depth_scale() const { return depth_scale_; }

 private:
  void parse_comment(const std::string& comment) {
    const std::size_t at = comment.find(kDepthTag);
    if (at == std::string::npos) return;
    const std::string value = comment.substr(at + std::char_traits<char>::length(kDepthTag));
    char* end = nullptr;
    const double s = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || !(s > 0.0) || !std::isfinite(s)) fail("invalid depth-scale comment");
    depth_scale_ = s;
  }

  const std::string& bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
  std::optional<double> depth_scale_;
};

std::string format_scale(double s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", s);
  return buf;
}

}  // namespace

int quantize_sample(double value, int maxval) {
  if (std::isnan(value)) throw DomainError("quantize_sample: NaN sample");
  const double v = std::min(1.0, std::max(0.0, value)) * maxval;
  return static_cast<int>(std::round(v));  // std::round rounds halves away from zero
}

NetpbmImage decode_netpbm(const std::string& bytes, const std::string& origin) {
  HeaderReader in(bytes, origin);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    in.fail("not a binary PGM (P5) or PPM (P6) file");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  in.advance(2);
  const int width = in.read_int("width");
  const int height = in.read_int("height");
  const int maxval = in.read_int("maxval");
  if (width <= 0 || height <= 0) in.fail("image has zero width or height");
  if (maxval < 1 || maxval > 65535) in.fail("maxval " + std::to_string(maxval) + " outside 1..65535");
  in.end_header();

  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - in.position() < count * bytes_per) in.fail("raster is truncated");

  NetpbmImage img;
  img.maxval = maxval;
  img.depth_scale = in.depth_scale();
  img.pixels = Grid(channels, height, width);
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + in.position());
  for (std::size_t k = 0; k < count; ++k) {
    const unsigned q = bytes_per == 2 ? (raster[2 * k] << 8 | raster[2 * k + 1]) : raster[k];
    if (q > static_cast<unsigned>(maxval)) in.fail("sample exceeds maxval");
    // Raster is interleaved (pixel-major); grids are channel-major.
    const std::size_t pixel = k / channels;
    const int c = static_cast<int>(k % channels);
    img.pixels[c * img.pixels.plane_size() + pixel] = static_cast<double>(q) / maxval;
  }
  return img;
}

std::string encode_netpbm(const NetpbmImage& image) {
  const Grid& g = image.pixels;
  if (g.channels() != 1 && g.channels() != 3) {
    throw DimensionError("encode_netpbm: " + std::to_string(g.channels()) +
                         " channels; only 1 (PGM) or 3 (PPM) can be written");
  }
  if (image.maxval < 1 || image.maxval > 65535) {
    throw ParameterError("encode_netpbm: maxval must be in 1..65535");
  }
  std::ostringstream os;
  os << (g.channels() == 1 ? "P5" : "P6") << '\n';
  if (image.depth_scale) os << "# " << kDepthTag << format_scale(*image.depth_scale) << '\n';
  os << g.width() << ' ' << g.height() << '\n' << image.maxval << '\n';
  std::string out = os.str();
  const bool wide = image.maxval > 255;
  const std::size_t plane = g.plane_size();
  out.reserve(out.size() + g.size() * (wide ? 2 : 1));
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < g.channels(); ++c) {
      const int q = quantize_sample(g[c * plane + p], image.maxval);
      if (wide) out.push_back(static_cast<char>(q >> 8));
      out.push_back(static_cast<char>(q & 0xFF));
    }
  return out;
}

NetpbmImage read_netpbm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_netpbm(ss.str(), path);
}

void write_netpbm(const std::string& path, const NetpbmImage& image) {
  const std::string bytes = encode_netpbm(image);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(path + ": write failed");
}

Grid depth_from_image(const NetpbmImage& image) {
  if (image.pixels.channels() != 1) {
    throw DimensionError("depth map must be a 1-channel image, got " + image.pixels.shape_string());
  }
  Grid d = image.pixels;
  const double scale = image.depth_scale.value_or(1.0) * image.maxval;
  for (double& v : d.values()) v *= scale;
  return d;
}

NetpbmImage depth_to_image(const Grid& depth, double depth_scale) {
  if (!(depth_scale > 0.0)) throw ParameterError("depth_to_image: depth scale must be positive");
  NetpbmImage img;
  img.maxval = 65535;
  img.depth_scale = depth_scale;
  img.pixels = depth;
  for (double& v : img.pixels.values()) {
    const double units = v / depth_scale;
    if (!(units >= 0.0 && units <= 65535.0)) {
      throw DomainError("depth_to_image: depth " + std::to_string(v) + " not representable with scale " +
                        format_scale(depth_scale));
    }
    v = units / 65535.0;
  }
  return img;
}

}  // namespace seaclear
