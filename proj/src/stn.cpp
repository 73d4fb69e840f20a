#include "seaclear/stn.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <string>

#include "seaclear/error.hpp"
#include "seaclear/rng.hpp"

namespace seaclear {

namespace {

constexpr double kSingularDeterminant = 1e-12;

std::string theta_string(const Homography& h) {
  std::string s;
  for (std::size_t i = 0; i < 8; ++i) {
    if (i) s += ",";
    s += std::to_string(h.theta[i]);
  }
  return s;
}

}  // namespace

Homography Homography::from_affine(const std::array<double, 6>& a) {
  return Homography{{a[0], a[1], a[2], a[3], a[4], a[5], 0.0, 0.0}};
}

Homography Homography::from_matrix(const std::array<double, 9>& m) {
  if (!(std::abs(m[8]) >= kHorizonGuard)) {
    throw SingularTransformError("singular transform: bottom-right entry " + std::to_string(m[8]) +
                                 " below guard");
  }
  Homography h;
  for (std::size_t i = 0; i < 8; ++i) h.theta[i] = m[i] / m[8];
  return h;
}

std::array<double, 9> Homography::matrix() const {
  return {theta[0], theta[1], theta[2], theta[3], theta[4], theta[5], theta[6], theta[7], 1.0};
}

double Homography::determinant() const {
  const auto m = matrix();
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

std::pair<double, double> Homography::map(double x, double y) const {
  const double X = theta[0] * x + theta[1] * y + theta[2];
  const double Y = theta[3] * x + theta[4] * y + theta[5];
  const double Z = theta[6] * x + theta[7] * y + 1.0;
  return {X / Z, Y / Z};
}

Homography compose(const Homography& a, const Homography& b) {
  const auto A = a.matrix();
  const auto B = b.matrix();
  std::array<double, 9> m{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += A[r * 3 + k] * B[k * 3 + c];
      m[r * 3 + c] = s;
    }
  }
  return Homography::from_matrix(m);
}

Homography inverse(const Homography& h) {
  const auto m = h.matrix();
  const double det = h.determinant();
  if (!(std::abs(det) > kSingularDeterminant)) {
    throw SingularTransformError("singular transform: determinant " + std::to_string(det));
  }
  // Adjugate; the common 1/det factor cancels in the normalization.
  const std::array<double, 9> adj{
      m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
      m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
      m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
  std::array<double, 9> inv{};
  for (std::size_t i = 0; i < 9; ++i) inv[i] = adj[i] / det;
  return Homography::from_matrix(inv);
}

double normalized_coord(int index, int extent) {
  if (extent <= 1) return 0.0;
  return -1.0 + 2.0 * static_cast<double>(index) / static_cast<double>(extent - 1);
}

SamplingGrid make_grid(const Homography& h, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ParameterError("make_grid: output size must be >= 1, got " + std::to_string(out_h) +
                         "x" + std::to_string(out_w));
  }
  const double det = h.determinant();
  if (!(std::abs(det) > kSingularDeterminant)) {
    throw SingularTransformError("singular transform: determinant " + std::to_string(det) +
                                 " for theta " + theta_string(h));
  }
  const auto& t = h.theta;
  SamplingGrid grid(out_h, out_w);
  for (int i = 0; i < out_h; ++i) {
    const double yt = normalized_coord(i, out_h);
    for (int j = 0; j < out_w; ++j) {
      const double xt = normalized_coord(j, out_w);
      const double X = t[0] * xt + t[1] * yt + t[2];
      const double Y = t[3] * xt + t[4] * yt + t[5];
      const double Z = t[6] * xt + t[7] * yt + 1.0;
      if (!(Z >= kHorizonGuard)) {
        throw SingularTransformError("singular transform: z = " + std::to_string(Z) +
                                     " at target (" + std::to_string(xt) + ", " +
                                     std::to_string(yt) + ") for theta " + theta_string(h));
      }
      grid.x(i, j) = X / Z;
      grid.y(i, j) = Y / Z;
    }
  }
  return grid;
}

SamplingGrid affine_grid(const std::array<double, 6>& a, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ParameterError("affine_grid: output size must be >= 1");
  }
  SamplingGrid grid(out_h, out_w);
  for (int i = 0; i < out_h; ++i) {
    const double yt = normalized_coord(i, out_h);
    for (int j = 0; j < out_w; ++j) {
      const double xt = normalized_coord(j, out_w);
      grid.x(i, j) = a[0] * xt + a[1] * yt + a[2];
      grid.y(i, j) = a[3] * xt + a[4] * yt + a[5];
    }
  }
  return grid;
}

std::array<double, 8> make_grid_backward(const Homography& h, const SamplingGrid& grad_grid) {
  const auto& t = h.theta;
  std::array<double, 8> g{};
  for (int i = 0; i < grad_grid.height; ++i) {
    const double yt = normalized_coord(i, grad_grid.height);
    for (int j = 0; j < grad_grid.width; ++j) {
      const double xt = normalized_coord(j, grad_grid.width);
      const double X = t[0] * xt + t[1] * yt + t[2];
      const double Y = t[3] * xt + t[4] * yt + t[5];
      const double Z = t[6] * xt + t[7] * yt + 1.0;
      const double gx = grad_grid.x(i, j) / Z;
      const double gy = grad_grid.y(i, j) / Z;
      g[0] += gx * xt;
      g[1] += gx * yt;
      g[2] += gx;
      g[3] += gy * xt;
      g[4] += gy * yt;
      g[5] += gy;
      // ∂(X/Z)/∂θ3k = -(X/Z)·(coordinate)/Z, likewise for Y.
      const double gz = -(gx * X + gy * Y) / Z;
      g[6] += gz * xt;
      g[7] += gz * yt;
    }
  }
  return g;
}

namespace {

struct Corner {
  int x0, y0;
  double fx, fy;  // weights of the (x0+1, y0+1) neighbours
};

Corner locate(double xs, double ys, int W, int H) {
  const double px = (xs + 1.0) * 0.5 * (W - 1);
  const double py = (ys + 1.0) * 0.5 * (H - 1);
  const double fx0 = std::floor(px), fy0 = std::floor(py);
  return {static_cast<int>(fx0), static_cast<int>(fy0), px - fx0, py - fy0};
}

bool inside(int x, int y, int W, int H) { return x >= 0 && x < W && y >= 0 && y < H; }

void require_finite(const SamplingGrid& grid) {
  for (std::size_t i = 0; i < grid.coords.size(); ++i) {
    if (!std::isfinite(grid.coords[i])) {
      throw DomainError("bilinear_sample: non-finite grid coordinate at entry " + std::to_string(i));
    }
  }
}

// Far-away samples would overflow the int conversion; anything this far out
// touches no pixel.
bool far_outside(double xs, double ys) { return std::abs(xs) > 1e6 || std::abs(ys) > 1e6; }

}  // namespace

Grid bilinear_sample(const Grid& input, const SamplingGrid& grid) {
  require_finite(grid);
  const int W = input.width(), H = input.height();
  Grid out(input.channels(), grid.height, grid.width);
  for (int i = 0; i < grid.height; ++i) {
    for (int j = 0; j < grid.width; ++j) {
      if (far_outside(grid.x(i, j), grid.y(i, j))) continue;
      const Corner k = locate(grid.x(i, j), grid.y(i, j), W, H);
      const int xs[2] = {k.x0, k.x0 + 1};
      const int ys[2] = {k.y0, k.y0 + 1};
      const double wx[2] = {1.0 - k.fx, k.fx};
      const double wy[2] = {1.0 - k.fy, k.fy};
      for (int c = 0; c < input.channels(); ++c) {
        double v = 0.0;
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            if (inside(xs[b], ys[a], W, H)) v += wy[a] * wx[b] * input(c, ys[a], xs[b]);
          }
        }
        out(c, i, j) = v;
      }
    }
  }
  return out;
}

SampleGrads bilinear_sample_backward(const Grid& input, const SamplingGrid& grid,
                                     const Grid& grad_out) {
  require_finite(grid);
  if (grad_out.channels() != input.channels() || grad_out.height() != grid.height ||
      grad_out.width() != grid.width) {
    throw DimensionError("bilinear_sample_backward: output gradient " + grad_out.shape_string() +
                         " does not match sampled output");
  }
  const int W = input.width(), H = input.height();
  const double sx = 0.5 * (W - 1), sy = 0.5 * (H - 1);
  SampleGrads g{Grid::zeros_like(input), SamplingGrid(grid.height, grid.width)};
  auto value = [&](int c, int y, int x) { return inside(x, y, W, H) ? input(c, y, x) : 0.0; };
  for (int i = 0; i < grid.height; ++i) {
    for (int j = 0; j < grid.width; ++j) {
      if (far_outside(grid.x(i, j), grid.y(i, j))) continue;
      const Corner k = locate(grid.x(i, j), grid.y(i, j), W, H);
      const int x1 = k.x0 + 1, y1 = k.y0 + 1;
      double gpx = 0.0, gpy = 0.0;
      for (int c = 0; c < input.channels(); ++c) {
        const double go = grad_out(c, i, j);
        if (go == 0.0) continue;
        const double v00 = value(c, k.y0, k.x0), v01 = value(c, k.y0, x1);
        const double v10 = value(c, y1, k.x0), v11 = value(c, y1, x1);
        gpx += go * ((1.0 - k.fy) * (v01 - v00) + k.fy * (v11 - v10));
        gpy += go * ((1.0 - k.fx) * (v10 - v00) + k.fx * (v11 - v01));
        if (inside(k.x0, k.y0, W, H)) g.input(c, k.y0, k.x0) += go * (1.0 - k.fy) * (1.0 - k.fx);
        if (inside(x1, k.y0, W, H)) g.input(c, k.y0, x1) += go * (1.0 - k.fy) * k.fx;
        if (inside(k.x0, y1, W, H)) g.input(c, y1, k.x0) += go * k.fy * (1.0 - k.fx);
        if (inside(x1, y1, W, H)) g.input(c, y1, x1) += go * k.fy * k.fx;
      }
      g.grid.x(i, j) = gpx * sx;
      g.grid.y(i, j) = gpy * sy;
    }
  }
  return g;
}

StnMode parse_stn_mode(const std::string& name) {
  if (name == "none") return StnMode::none;
  if (name == "affine") return StnMode::affine;
  if (name == "perspective") return StnMode::perspective;
  throw ParameterError("unknown STN mode '" + name + "' (expected none, affine or perspective)");
}

std::string to_string(StnMode mode) {
  switch (mode) {
    case StnMode::none:
      return "none";
    case StnMode::affine:
      return "affine";
    case StnMode::perspective:
      return "perspective";
  }
  return "?";
}

LocParams LocParams::create(int in_channels, int in_h, int in_w, Rng& rng, int hidden1,
                            int hidden2) {
  LocParams p;
  p.conv1 = ConvParams::same(hidden1, in_channels, 3, 2);
  p.conv1.init_he(rng);
  p.conv2 = ConvParams::same(hidden2, hidden1, 3, 2);
  p.conv2.init_he(rng);
  const int h2 = p.conv2.output_height(p.conv1.output_height(in_h));
  const int w2 = p.conv2.output_width(p.conv1.output_width(in_w));
  p.fc = ConvParams::zeros(8, hidden2, h2, w2);
  const Homography id = Homography::identity();
  std::copy(id.theta.begin(), id.theta.end(), p.fc.bias.begin());
  return p;
}

LocParams LocParams::zeros_like() const {
  return {conv1.zeros_like(), conv2.zeros_like(), fc.zeros_like()};
}

void LocParams::collect(const std::string& prefix, TensorList& out) {
  seaclear::collect(prefix + ".conv1", conv1, out);
  seaclear::collect(prefix + ".conv2", conv2, out);
  seaclear::collect(prefix + ".fc", fc, out);
}

Homography localize(const Grid& features, const LocParams& params) {
  LocTape tape;
  return localize(features, params, tape);
}

Homography localize(const Grid& features, const LocParams& params, LocTape& tape) {
  if (features.height() < 4 || features.width() < 4) {
    throw DimensionError("localize: feature map " + features.shape_string() +
                         " too small (height and width must be >= 4)");
  }
  if (params.fc.out_channels != 8) {
    throw DimensionError("localize: final layer must emit 8 values, got " +
                         std::to_string(params.fc.out_channels));
  }
  Grid x = conv_forward(features, params.conv1, true, tape.conv1);
  x = conv_forward(x, params.conv2, true, tape.conv2);
  if (x.height() != params.fc.kernel_h || x.width() != params.fc.kernel_w) {
    throw DimensionError("localize: fully connected layer expects a " +
                         std::to_string(params.fc.kernel_h) + "x" +
                         std::to_string(params.fc.kernel_w) + " map, got " +
                         std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                         " (height/width)");
  }
  const Grid out = conv_forward(x, params.fc, false, tape.fc);
  Homography h;
  for (std::size_t i = 0; i < 6; ++i) h.theta[i] = out[i];
  for (std::size_t i = 6; i < 8; ++i) h.theta[i] = kPerspectiveBound * std::tanh(out[i]);
  return h;
}

LocGrads localize_backward(const LocTape& tape, const LocParams& params,
                           const std::array<double, 8>& grad_theta) {
  LocGrads g{params.zeros_like(), Grid()};
  Grid gout(8, 1, 1, std::vector<double>(grad_theta.begin(), grad_theta.end()));
  for (std::size_t i = 6; i < 8; ++i) {
    const double th = std::tanh(tape.fc.pre[i]);
    gout[i] *= kPerspectiveBound * (1.0 - th * th);
  }
  Grid gx = conv_backward(tape.fc, params.fc, false, gout, g.params.fc);
  gx = conv_backward(tape.conv2, params.conv2, true, gx, g.params.conv2);
  g.features = conv_backward(tape.conv1, params.conv1, true, gx, g.params.conv1);
  return g;
}

Grid stn_forward(const Grid& features, const LocParams& params, StnMode mode) {
  StnTape tape;
  return stn_forward(features, params, mode, tape);
}

Grid stn_forward(const Grid& features, const LocParams& params, StnMode mode, StnTape& tape) {
  tape.mode = mode;
  tape.input = features;
  if (mode == StnMode::none) return features;
  tape.transform = localize(features, params, tape.loc);
  if (mode == StnMode::affine) {
    tape.transform.theta[6] = 0.0;
    tape.transform.theta[7] = 0.0;
    const auto& t = tape.transform.theta;
    tape.grid = affine_grid({t[0], t[1], t[2], t[3], t[4], t[5]}, features.height(), features.width());
  } else {
    tape.grid = make_grid(tape.transform, features.height(), features.width());
  }
  return bilinear_sample(features, tape.grid);
}

StnGrads stn_backward(const StnTape& tape, const LocParams& params, const Grid& grad_out) {
  if (tape.mode == StnMode::none) return {params.zeros_like(), grad_out};
  SampleGrads sg = bilinear_sample_backward(tape.input, tape.grid, grad_out);
  auto gtheta = make_grid_backward(tape.transform, sg.grid);
  if (tape.mode == StnMode::affine) {
    gtheta[6] = 0.0;
    gtheta[7] = 0.0;
  }
  LocGrads lg = localize_backward(tape.loc, params, gtheta);
  sg.input += lg.features;
  return {std::move(lg.params), std::move(sg.input)};
}

double kink_distance(const LocTape& tape) {
  return std::min(kink_distance(tape.conv1), kink_distance(tape.conv2));
}

}  // namespace seaclear
