#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace seaclear {

/// Dense rank-3 field laid out as [channels][height][width], row-major.
///
/// Grids carry images, feature maps, transmission maps and their gradients.
/// A default-constructed grid is empty (0×0×0); every other grid has
/// positive extents and exactly channels·height·width values.
class Grid {
 public:
  Grid() = default;
  Grid(int channels, int height, int width, double fill = 0.0);
  Grid(int channels, int height, int width, std::vector<double> values);

  static Grid zeros_like(const Grid& other) {
    return Grid(other.channels_, other.height_, other.width_);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  bool empty() const { return data_.empty(); }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }
  double& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
  double operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> plane(int c) { return data().subspan(c * plane_size(), plane_size()); }
  std::span<const double> plane(int c) const {
    return data().subspan(c * plane_size(), plane_size());
  }
  std::vector<double>& values() & { return data_; }
  const std::vector<double>& values() const& { return data_; }
  // Rvalue overload so `for (double v : make_grid().values())` stays valid.
  std::vector<double> values() && { return std::move(data_); }

  bool same_shape(const Grid& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }
  bool all_finite() const;
  std::string shape_string() const;

  // Elementwise accumulation; shapes must match.
  Grid& operator+=(const Grid& other);
  Grid& operator*=(double s);

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Throws DimensionError unless `a` and `b` have identical shape.
void require_same_shape(const Grid& a, const Grid& b, const char* what);

/// Stacks grids with equal spatial size along the channel axis.
Grid concat_channels(std::span<const Grid> parts);

/// Extracts channels [first, first + count).
Grid slice_channels(const Grid& g, int first, int count);

double max_abs_diff(const Grid& a, const Grid& b);

}  // namespace seaclear
