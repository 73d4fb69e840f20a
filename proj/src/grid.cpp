#include "seaclear/grid.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "seaclear/error.hpp"

namespace seaclear {

namespace {

void check_extents(int c, int h, int w) {
  if (c <= 0 || h <= 0 || w <= 0) {
    throw DimensionError("grid extents must be positive, got " + std::to_string(c) + "x" +
                         std::to_string(h) + "x" + std::to_string(w));
  }
}

}  // namespace

Grid::Grid(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  check_extents(channels, height, width);
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

Grid::Grid(int channels, int height, int width, std::vector<double> values)
    : channels_(channels), height_(height), width_(width), data_(std::move(values)) {
  check_extents(channels, height, width);
  if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
    throw DimensionError("grid " + shape_string() + " needs " +
                         std::to_string(static_cast<std::size_t>(channels) * height * width) +
                         " values, got " + std::to_string(data_.size()));
  }
}

bool Grid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Grid::shape_string() const {
  return std::to_string(channels_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
}

Grid& Grid::operator+=(const Grid& other) {
  require_same_shape(*this, other, "grid accumulation");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Grid& Grid::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

void require_same_shape(const Grid& a, const Grid& b, const char* what) {
  if (a.same_shape(b)) return;
  std::string axes;
  if (a.channels() != b.channels()) axes += " channels";
  if (a.height() != b.height()) axes += " height";
  if (a.width() != b.width()) axes += " width";
  throw DimensionError(std::string(what) + ": shape " + a.shape_string() + " vs " +
                       b.shape_string() + " (mismatched:" + axes + ")");
}

Grid concat_channels(std::span<const Grid> parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const int h = parts.front().height();
  const int w = parts.front().width();
  int total = 0;
  for (const Grid& p : parts) {
    if (p.height() != h || p.width() != w) {
      throw DimensionError("concat_channels: spatial size " + p.shape_string() +
                           " differs from " + parts.front().shape_string());
    }
    total += p.channels();
  }
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(total) * h * w);
  for (const Grid& p : parts) values.insert(values.end(), p.values().begin(), p.values().end());
  return Grid(total, h, w, std::move(values));
}

Grid slice_channels(const Grid& g, int first, int count) {
  if (first < 0 || count <= 0 || first + count > g.channels()) {
    throw DimensionError("slice_channels: range [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") outside " + g.shape_string());
  }
  auto begin = g.values().begin() + static_cast<std::ptrdiff_t>(first * g.plane_size());
  std::vector<double> values(begin, begin + static_cast<std::ptrdiff_t>(count * g.plane_size()));
  return Grid(count, g.height(), g.width(), std::move(values));
}

double max_abs_diff(const Grid& a, const Grid& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace seaclear
