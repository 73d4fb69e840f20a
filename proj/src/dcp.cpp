#include "seaclear/dcp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "seaclear/error.hpp"

namespace seaclear {

namespace {

void require_odd_patch(int patch, const char* what) {
  if (patch < 1 || patch % 2 == 0) {
    throw ParameterError(std::string(what) + ": patch must be odd and >= 1, got " +
                         std::to_string(patch));
  }
}

// 1-D sliding minimum along rows (horizontal) or columns, replicate border.
void min_filter_rows(const std::vector<double>& src, std::vector<double>& dst, int h, int w,
                     int radius) {
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<std::ptrdiff_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double m = row[x];
      const int lo = std::max(0, x - radius), hi = std::min(w - 1, x + radius);
      for (int k = lo; k <= hi; ++k) m = std::min(m, row[k]);
      dst[static_cast<std::size_t>(y) * w + x] = m;
    }
  }
}

void min_filter_cols(const std::vector<double>& src, std::vector<double>& dst, int h, int w,
                     int radius) {
  for (int y = 0; y < h; ++y) {
    const int lo = std::max(0, y - radius), hi = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) {
      double m = src[static_cast<std::size_t>(y) * w + x];
      for (int k = lo; k <= hi; ++k) m = std::min(m, src[static_cast<std::size_t>(k) * w + x]);
      dst[static_cast<std::size_t>(y) * w + x] = m;
    }
  }
}

}  // namespace

Grid dark_channel(const Grid& image, int patch) {
  require_odd_patch(patch, "dark_channel");
  const int h = image.height(), w = image.width();
  std::vector<double> cmin(image.plane(0).begin(), image.plane(0).end());
  for (int c = 1; c < image.channels(); ++c) {
    const auto p = image.plane(c);
    for (std::size_t k = 0; k < cmin.size(); ++k) cmin[k] = std::min(cmin[k], p[k]);
  }
  // A square window minimum separates into a row pass and a column pass;
  // clamping each axis independently is exactly replicate padding.
  std::vector<double> tmp(cmin.size());
  std::vector<double> out(cmin.size());
  const int radius = patch / 2;
  min_filter_rows(cmin, tmp, h, w, radius);
  min_filter_cols(tmp, out, h, w, radius);
  return Grid(1, h, w, std::move(out));
}

BackgroundLight estimate_background_light(const Grid& image, int patch, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ParameterError("estimate_background_light: fraction must lie in (0, 1], got " +
                         std::to_string(fraction));
  }
  const Grid dark = dark_channel(image, patch);
  const std::size_t n = dark.size();
  // The small slack keeps products like 0.001·1000 from rounding up to 2.
  std::size_t count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  count = std::clamp<std::size_t>(count, 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (dark[a] != dark[b]) return dark[a] > dark[b];
                      return a < b;
                    });
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));

  std::size_t best = order[0];
  double best_sum = -1.0;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t idx = order[k];
    double sum = 0.0;
    for (int c = 0; c < image.channels(); ++c) sum += image.plane(c)[idx];
    if (sum > best_sum) {
      best_sum = sum;
      best = idx;
    }
  }
  std::vector<double> a(image.channels());
  for (int c = 0; c < image.channels(); ++c) a[c] = std::clamp(image.plane(c)[best], 0.0, 1.0);
  return BackgroundLight(std::move(a));
}

Grid estimate_transmission_dcp(const Grid& image, const BackgroundLight& A, int patch,
                               double omega) {
  if (!(omega > 0.0 && omega <= 1.0)) {
    throw ParameterError("estimate_transmission_dcp: omega must lie in (0, 1], got " +
                         std::to_string(omega));
  }
  A.require_channels(image.channels(), "estimate_transmission_dcp");
  Grid normalized = image;
  for (int c = 0; c < image.channels(); ++c) {
    if (!(A[c] > 0.0)) {
      throw DomainError("estimate_transmission_dcp: background light component " +
                        std::to_string(c) + " is zero");
    }
    for (double& v : normalized.plane(c)) v /= A[c];
  }
  Grid t = dark_channel(normalized, patch);
  for (double& v : t.values()) v = std::clamp(1.0 - omega * v, kTransmissionFloor, 1.0);
  return t;
}

Grid compute_B(const Grid& hazy, const Grid& t, const BackgroundLight& A) {
  if (t.height() != hazy.height() || t.width() != hazy.width() ||
      (t.channels() != 1 && t.channels() != hazy.channels())) {
    throw DimensionError("compute_B: transmission " + t.shape_string() +
                         " does not fit image " + hazy.shape_string());
  }
  A.require_channels(hazy.channels(), "compute_B");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= kTransmissionFloor)) {
      throw DomainError("compute_B: transmission " + std::to_string(t[i]) + " at index " +
                        std::to_string(i) + " below floor " + std::to_string(kTransmissionFloor));
    }
  }
  Grid b = Grid::zeros_like(hazy);
  for (int c = 0; c < hazy.channels(); ++c) {
    const double a = A[c];
    const auto tp = t.plane(t.channels() == 1 ? 0 : c);
    const auto ip = hazy.plane(c);
    auto bp = b.plane(c);
    for (std::size_t k = 0; k < bp.size(); ++k) {
      double denom = ip[k] - 1.0;
      if (std::abs(denom) < kBDenominatorFloor) {
        denom = denom > 0.0 ? kBDenominatorFloor : -kBDenominatorFloor;
      }
      bp[k] = ((ip[k] - a) / tp[k] + (a - 1.0)) / denom;
    }
  }
  return b;
}

Grid recover_clear(const Grid& b_map, const Grid& hazy) {
  require_same_shape(b_map, hazy, "recover_clear");
  Grid j = Grid::zeros_like(hazy);
  // I + (B - 1)(I - 1) equals B·I - B + 1 and is exact at B = 1.
  for (std::size_t i = 0; i < j.size(); ++i) j[i] = hazy[i] + (b_map[i] - 1.0) * (hazy[i] - 1.0);
  return j;
}

RecoverGrads recover_clear_backward(const Grid& b_map, const Grid& hazy, const Grid& grad_out) {
  require_same_shape(b_map, hazy, "recover_clear_backward");
  require_same_shape(b_map, grad_out, "recover_clear_backward");
  RecoverGrads g{Grid::zeros_like(hazy), Grid::zeros_like(hazy)};
  for (std::size_t i = 0; i < hazy.size(); ++i) {
    g.b_map[i] = grad_out[i] * (hazy[i] - 1.0);
    g.hazy[i] = grad_out[i] * b_map[i];
  }
  return g;
}

DcpLoss dcp_loss(const Grid& clear_pred, int patch) {
  require_odd_patch(patch, "dcp_loss");
  const int C = clear_pred.channels(), H = clear_pred.height(), W = clear_pred.width();
  const int r = patch / 2;
  const double inv_n = 1.0 / static_cast<double>(clear_pred.plane_size());
  DcpLoss loss{0.0, Grid::zeros_like(clear_pred)};
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      std::size_t arg = clear_pred.index(0, std::clamp(y - r, 0, H - 1), std::clamp(x - r, 0, W - 1));
      double m = clear_pred[arg];
      // Flat index order is (c, y, x); visiting in that order with a strict
      // comparison keeps the lowest index among equal minima.
      for (int c = 0; c < C; ++c) {
        for (int yy = std::max(0, y - r); yy <= std::min(H - 1, y + r); ++yy) {
          for (int xx = std::max(0, x - r); xx <= std::min(W - 1, x + r); ++xx) {
            const std::size_t idx = clear_pred.index(c, yy, xx);
            if (clear_pred[idx] < m || (clear_pred[idx] == m && idx < arg)) {
              m = clear_pred[idx];
              arg = idx;
            }
          }
        }
      }
      loss.value += std::abs(m) * inv_n;
      const double sign = m > 0.0 ? 1.0 : (m < 0.0 ? -1.0 : 0.0);
      loss.grad[arg] += sign * inv_n;
    }
  }
  return loss;
}

double dcp_margin(const Grid& image, int patch) {
  if (patch <= 0 || patch % 2 == 0) throw ParameterError("dcp_margin: patch must be odd and positive");
  const int r = patch / 2;
  double margin = std::numeric_limits<double>::infinity();
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      double lo = std::numeric_limits<double>::infinity(), second = lo;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = std::clamp(y + dy, 0, image.height() - 1);
          const int xx = std::clamp(x + dx, 0, image.width() - 1);
          for (int c = 0; c < image.channels(); ++c) {
            const double v = image(c, yy, xx);
            if (v < lo) {
              second = lo;
              lo = v;
            } else if (v > lo && v < second) {
              second = v;
            }
          }
        }
      margin = std::min({margin, second - lo, std::abs(lo)});
    }
  return margin;
}

}  // namespace seaclear
