#include "seaclear/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "seaclear/dcp.hpp"
#include "seaclear/error.hpp"
#include "seaclear/rng.hpp"

namespace seaclear {

namespace {

constexpr int kFeatureChannels = 32;
constexpr int kReduceChannels = 8;
constexpr double kBackgroundFraction = 0.001;

// Stream identifiers for derive_seed, so every random consumer of a run
// draws from its own sequence.
enum Stream : std::uint64_t {
  kStreamData = 1,
  kStreamInit = 2,
  kStreamShuffle = 3,
  kStreamDropout = 4,
  kStreamTrainShapes = 5,
  kStreamTestShapes = 6,
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

void require_finite(double value, const std::string& what, int epoch, int step) {
  if (!std::isfinite(value)) {
    throw EvaluationError(what + ": non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                          std::to_string(step));
  }
}

Grid clamp_unit(Grid g) {
  for (double& v : g.values()) v = std::clamp(v, 0.0, 1.0);
  return g;
}

// Sum of four products of sinusoids with random frequency (cycles per image)
// and phase, rescaled to [0.05, 0.95].
std::vector<double> sinusoid_texture(int size, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(size) * size, 0.0);
  for (int term = 0; term < 4; ++term) {
    const double amp = rng.uniform(0.5, 1.0);
    const double fx = rng.uniform(1.0, 6.0), fy = rng.uniform(1.0, 6.0);
    const double px = rng.uniform(0.0, 2 * std::numbers::pi), py = rng.uniform(0.0, 2 * std::numbers::pi);
    for (int y = 0; y < size; ++y) {
      const double sy = std::sin(2 * std::numbers::pi * fy * y / (size - 1) + py);
      for (int x = 0; x < size; ++x) {
        v[static_cast<std::size_t>(y) * size + x] +=
            amp * sy * std::sin(2 * std::numbers::pi * fx * x / (size - 1) + px);
      }
    }
  }
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, range = *hi - *lo;
  for (double& e : v) e = range > 0.0 ? 0.05 + 0.9 * (e - a) / range : 0.5;
  return v;
}

// Linear ramp plus three gaussian bumps, rescaled to [near, far] with
// near in [0, 1.5] and far in [2.5, 4].
Grid depth_map(int size, Rng& rng) {
  Grid d(1, size, size);
  const double gx = rng.uniform(-1, 1), gy = rng.uniform(-1, 1);
  struct Bump {
    double cx, cy, sigma, amp;
  };
  std::array<Bump, 3> bumps{};
  for (Bump& b : bumps) {
    b.cx = rng.uniform(0, 1);
    b.cy = rng.uniform(0, 1);
    b.sigma = rng.uniform(0.1, 0.3);
    b.amp = rng.uniform(-1, 1);
  }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = static_cast<double>(x) / (size - 1), w = static_cast<double>(y) / (size - 1);
      double v = gx * u + gy * w;
      for (const Bump& b : bumps) {
        v += b.amp * std::exp(-((u - b.cx) * (u - b.cx) + (w - b.cy) * (w - b.cy)) /
                              (2 * b.sigma * b.sigma));
      }
      d(0, y, x) = v;
    }
  const auto [lo, hi] = std::minmax_element(d.values().begin(), d.values().end());
  const double a = *lo, range = *hi - *lo;
  const double near = rng.uniform(0.0, 1.5), far = rng.uniform(2.5, 4.0);
  for (double& v : d.values()) v = near + (far - near) * (range > 0.0 ? (v - a) / range : 0.0);
  return d;
}

void require_size(int size, const char* what) {
  if (size <= 0 || size % 16 != 0) {
    throw DimensionError(std::string(what) + ": image size " + std::to_string(size) +
                         " must be a positive multiple of 16");
  }
}

struct StnGradients {
  ExtractorParams extractor;
  LocParams loc;
  ClassifierParams classifier;

  explicit StnGradients(const ModelState& m)
      : extractor(m.extractor.zeros_like()), loc(m.loc.zeros_like()), classifier(m.classifier.zeros_like()) {}

  TensorList tensors() {
    TensorList out;
    extractor.collect("extractor", out);
    loc.collect("loc", out);
    classifier.collect("classifier", out);
    return out;
  }
};

// into += from, for two models of identical layout.
template <typename Params>
void add_into(Params& into, Params& from) {
  TensorList a, b;
  into.collect("", a);
  from.collect("", b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::vector<double>& dst = *a[i].values;
    const std::vector<double>& src = *b[i].values;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

void scale_all(const TensorList& tensors, double s) {
  for (const TensorRef& t : tensors)
    for (double& v : *t.values) v *= s;
}

}  // namespace

// ------------------------------------------------------------------ config

TrainConfig TrainConfig::full() {
  TrainConfig c;
  c.learning_rate = 1e-4;
  c.batch_size = 16;
  c.epochs = 150;
  c.dropout_rate = 0.3;
  c.image_size = 512;
  return c;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& rule) {
    throw ParameterError("config: " + field + " " + rule);
  };
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate", "must be finite and >= 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (epochs < 0) fail("epochs", "must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate", "must be in [0, 1)");
  if (!(lambda_dcp >= 0.0) || !std::isfinite(lambda_dcp)) fail("lambda_dcp", "must be finite and >= 0");
  if (patch < 1 || patch % 2 == 0) fail("patch", "must be a positive odd integer");
  if (image_size < 16 || image_size % 16 != 0) fail("image_size", "must be a positive multiple of 16");
  if (num_images < 1) fail("num_images", "must be >= 1");
}

// ------------------------------------------------------------------ losses

ReconstructionLoss reconstruction_loss(const Grid& reconstructed, const Grid& original) {
  require_same_shape(reconstructed, original, "reconstruction_loss");
  ReconstructionLoss out;
  out.grad = Grid::zeros_like(original);
  double sq = 0.0;
  const double n = static_cast<double>(original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double d = reconstructed[i] - original[i];
    sq += d * d;
    out.grad[i] = 2.0 * d / n;
  }
  out.frobenius = std::sqrt(sq);
  out.mse = sq / n;
  return out;
}

TotalLoss total_loss(const Grid& original, const Grid& clear_pred, const Grid& t_pred,
                     const BackgroundLight& A, const TrainConfig& config) {
  const Grid rec = reconstruct_hazy(clear_pred, t_pred, A);
  ReconstructionLoss rl = reconstruction_loss(rec, original);
  const DcpLoss dl = dcp_loss(clear_pred, config.patch);
  ReconstructGrads rg = reconstruct_hazy_backward(clear_pred, t_pred, A, rl.grad);

  TotalLoss out;
  out.reconstruction = rl.frobenius;
  out.reconstruction_mse = rl.mse;
  out.dcp = dl.value;
  out.total = rl.mse + config.lambda_dcp * dl.value;
  out.grad_clear = std::move(rg.clear);
  for (std::size_t i = 0; i < out.grad_clear.size(); ++i) {
    out.grad_clear[i] += config.lambda_dcp * dl.grad[i];
  }
  out.grad_transmission = std::move(rg.transmission);
  return out;
}

double psnr(const Grid& pred, const Grid& truth) {
  require_same_shape(pred, truth, "psnr");
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sq += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  const double mse = sq / static_cast<double>(pred.size());
  if (mse < 1e-10) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

// ---------------------------------------------------------------- datasets

std::vector<UnderwaterSample> gen_underwater_dataset(int n, int size, std::uint64_t seed) {
  require_size(size, "gen_underwater_dataset");
  if (n < 0) throw ParameterError("gen_underwater_dataset: negative sample count");
  std::vector<UnderwaterSample> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, kStreamData, k));
    Grid clear(3, size, size);
    for (int c = 0; c < 3; ++c) {
      const std::vector<double> tex = sinusoid_texture(size, rng);
      std::copy(tex.begin(), tex.end(), clear.plane(c).begin());
    }
    Grid depth = depth_map(size, rng);
    // Water tint: red absorbed first, so the ambient light leans blue-green.
    BackgroundLight A{rng.uniform(0.6, 0.75), rng.uniform(0.7, 0.9), rng.uniform(0.7, 0.9)};
    AttenuationCoeff beta{rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)};
    Grid t = transmission_from_depth(depth, beta, 3);
    for (double& v : t.values()) v = std::max(v, kTransmissionFloor);
    Grid hazy = synthesize_hazy(clear, t, A);
    out.push_back({std::move(clear), std::move(depth), std::move(hazy), std::move(t), std::move(A),
                   std::move(beta)});
  }
  return out;
}

std::vector<ShapeSample> gen_shapes_dataset(int n, int size, bool distort, std::uint64_t seed) {
  if (size < 16) throw DimensionError("gen_shapes_dataset: size must be >= 16");
  if (n < 0) throw ParameterError("gen_shapes_dataset: negative sample count");
  std::vector<ShapeSample> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, kStreamTrainShapes, k));
    const auto cls = static_cast<ShapeClass>(k % kShapeClasses);
    Grid img(1, size, size);
    for (double& v : img.values()) v = rng.uniform(0.0, 0.3);
    const double r = rng.uniform(0.18, 0.3) * size;
    const double cx = rng.uniform(r + 1, size - 2 - r), cy = rng.uniform(r + 1, size - 2 - r);
    const double ink = rng.uniform(0.7, 1.0);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double dx = x - cx, dy = y - cy;
        bool inside = false;
        switch (cls) {
          case ShapeClass::square:
            inside = std::abs(dx) <= r && std::abs(dy) <= r;
            break;
          case ShapeClass::triangle:
            // Apex up, base at dy = r, half-width growing linearly to r.
            inside = dy <= r && dy >= -r && std::abs(dx) <= (dy + r) / 2;
            break;
          case ShapeClass::disc:
            inside = dx * dx + dy * dy <= r * r;
            break;
        }
        if (inside) img(0, y, x) = ink;
      }
    if (distort) {
      Homography h;
      h.theta[0] += rng.uniform(-0.1, 0.1);
      h.theta[1] = rng.uniform(-0.1, 0.1);
      h.theta[2] = rng.uniform(-0.1, 0.1);
      h.theta[3] = rng.uniform(-0.1, 0.1);
      h.theta[4] += rng.uniform(-0.1, 0.1);
      h.theta[5] = rng.uniform(-0.1, 0.1);
      h.theta[6] = rng.uniform(-0.3, 0.3);
      h.theta[7] = rng.uniform(-0.3, 0.3);
      img = bilinear_sample(img, make_grid(h, size, size));
    }
    out.push_back({std::move(img), static_cast<int>(cls)});
  }
  const std::vector<std::size_t> order = shuffled_order(out.size(), derive_seed(seed, kStreamShuffle));
  std::vector<ShapeSample> shuffled;
  shuffled.reserve(out.size());
  for (std::size_t i : order) shuffled.push_back(std::move(out[i]));
  return shuffled;
}

// --------------------------------------------------------------- extractor

ExtractorParams ExtractorParams::create(int in_channels, Rng& rng) {
  ExtractorParams p;
  p.layers[0] = ConvParams::same(8, in_channels, 3, 1);
  p.layers[1] = ConvParams::same(16, 8, 3, 2);
  p.layers[2] = ConvParams::same(kFeatureChannels, 16, 3, 2);
  for (ConvParams& l : p.layers) l.init_he(rng);
  return p;
}

ExtractorParams ExtractorParams::zeros_like() const {
  ExtractorParams z;
  for (std::size_t i = 0; i < layers.size(); ++i) z.layers[i] = layers[i].zeros_like();
  return z;
}

void ExtractorParams::collect(const std::string& prefix, TensorList& out) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    seaclear::collect(prefix + ".conv" + std::to_string(i), layers[i], out);
  }
}

Grid extract_features(const Grid& image, const ExtractorParams& params) {
  ExtractorTape tape;
  return extract_features(image, params, tape);
}

Grid extract_features(const Grid& image, const ExtractorParams& params, ExtractorTape& tape) {
  Grid x = image;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    x = conv_forward(x, params.layers[i], true, tape.layers[i]);
  }
  return x;
}

Grid extract_features_backward(const ExtractorTape& tape, const ExtractorParams& params,
                               const Grid& grad_features, ExtractorParams& grads) {
  Grid g = grad_features;
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    g = conv_backward(tape.layers[i], params.layers[i], true, g, grads.layers[i]);
  }
  return g;
}

// -------------------------------------------------------------- classifier

ClassifierParams ClassifierParams::create(int in_channels, int in_h, int in_w, int classes, Rng& rng) {
  ClassifierParams p;
  p.conv1 = ConvParams::same(16, in_channels, 3, 1);
  p.conv2 = ConvParams::same(16, 16, 3, 2);
  p.fc = ConvParams::zeros(classes, 16, p.conv2.output_height(in_h), p.conv2.output_width(in_w));
  p.conv1.init_he(rng);
  p.conv2.init_he(rng);
  p.fc.init_he(rng, 0.5);
  return p;
}

ClassifierParams ClassifierParams::zeros_like() const {
  return {conv1.zeros_like(), conv2.zeros_like(), fc.zeros_like()};
}

void ClassifierParams::collect(const std::string& prefix, TensorList& out) {
  seaclear::collect(prefix + ".conv1", conv1, out);
  seaclear::collect(prefix + ".conv2", conv2, out);
  seaclear::collect(prefix + ".fc", fc, out);
}

std::vector<double> classify(const Grid& features, const ClassifierParams& params,
                             ClassifierTape& tape) {
  Grid x = conv_forward(features, params.conv1, true, tape.conv1);
  x = conv_forward(x, params.conv2, true, tape.conv2);
  x = dropout(x, tape.dropout_rate, tape.dropout_seed, tape.training);
  if (x.height() != params.fc.kernel_h || x.width() != params.fc.kernel_w) {
    throw DimensionError("classify: features give a " + x.shape_string() +
                         " map but the fully connected layer expects " +
                         std::to_string(params.fc.kernel_h) + "x" + std::to_string(params.fc.kernel_w));
  }
  return conv_forward(x, params.fc, false, tape.fc).values();
}

Grid classify_backward(const ClassifierTape& tape, const ClassifierParams& params,
                       const std::vector<double>& grad_logits, ClassifierParams& grads) {
  Grid g(static_cast<int>(grad_logits.size()), 1, 1, grad_logits);
  g = conv_backward(tape.fc, params.fc, false, g, grads.fc);
  g = dropout(g, tape.dropout_rate, tape.dropout_seed, tape.training);
  g = conv_backward(tape.conv2, params.conv2, true, g, grads.conv2);
  return conv_backward(tape.conv1, params.conv1, true, g, grads.conv1);
}

CrossEntropy softmax_cross_entropy(const std::vector<double>& logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.size())) {
    throw ParameterError("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  CrossEntropy out;
  out.grad.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) out.grad[k] = std::exp(logits[k] - m) / z;
  out.loss = -(logits[label] - m - std::log(z));
  out.grad[label] -= 1.0;
  return out;
}

// ------------------------------------------------------------------- model

TensorList ModelState::deblur_tensors() {
  TensorList out;
  extractor.collect("extractor", out);
  trans.collect("trans", out);
  deblur.collect("deblur", out);
  return out;
}

TensorList ModelState::stn_tensors() {
  TensorList out;
  extractor.collect("extractor", out);
  loc.collect("loc", out);
  classifier.collect("classifier", out);
  return out;
}

std::string Metrics::to_csv() const {
  std::ostringstream os;
  os << "epoch,loss_rec,loss_dcp,loss_total,psnr_pred,psnr_hazy,accuracy\n";
  char line[256];
  for (const EpochRecord& r : records) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.6f,%.6f,%.6f\n", r.epoch, r.loss_rec,
                  r.loss_dcp, r.loss_total, r.psnr_pred, r.psnr_hazy, r.accuracy);
    os << line;
  }
  return os.str();
}

ModelState init_deblur_model(const TrainConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, kStreamInit));
  ModelState m;
  m.extractor = ExtractorParams::create(3, rng);
  m.trans = TransNetParams::create(3, rng);
  m.deblur = DeblurParams::create(kFeatureChannels, kReduceChannels, 3, rng);
  return m;
}

DeblurModelGrads::DeblurModelGrads(const ModelState& model)
    : extractor(model.extractor.zeros_like()),
      trans(model.trans.zeros_like()),
      deblur(model.deblur.zeros_like()) {}

TensorList DeblurModelGrads::tensors() {
  TensorList out;
  extractor.collect("extractor", out);
  trans.collect("trans", out);
  deblur.collect("deblur", out);
  return out;
}

TotalLoss selfsup_loss(const ModelState& model, const Grid& hazy, const BackgroundLight& A,
                       const TrainConfig& config, DeblurModelGrads* grads) {
  ExtractorTape etape;
  DeblurTape dtape;
  TransNetTape ttape;
  const Grid features = extract_features(hazy, model.extractor, etape);
  const Grid clear = deblur_forward(hazy, features, model.deblur, dtape);
  const Grid t = predict_transmission(hazy, model.trans, ttape);
  TotalLoss loss = total_loss(hazy, clear, t, A, config);
  if (grads == nullptr) return loss;

  DeblurGrads dg = deblur_backward(dtape, model.deblur, loss.grad_clear);
  add_into(grads->deblur, dg.params);
  extract_features_backward(etape, model.extractor, dg.features, grads->extractor);
  TransNetGrads tg = predict_transmission_backward(ttape, model.trans, loss.grad_transmission);
  add_into(grads->trans, tg.params);
  return loss;
}

Grid predict_clear(const ModelState& model, const Grid& hazy) {
  return deblur_forward(hazy, extract_features(hazy, model.extractor), model.deblur);
}

TrainResult train_selfsup_deblur(const TrainConfig& config) {
  config.validate();
  return train_selfsup_deblur(config,
                              gen_underwater_dataset(config.num_images, config.image_size, config.seed));
}

TrainResult train_selfsup_deblur(const TrainConfig& config,
                                 const std::vector<UnderwaterSample>& dataset) {
  config.validate();
  if (dataset.empty()) throw ParameterError("train_selfsup_deblur: empty dataset");
  TrainResult result{init_deblur_model(config), {}};
  ModelState& model = result.model;

  // A is read off each hazy input once; it is not learned.
  std::vector<BackgroundLight> background;
  std::vector<double> hazy_psnr;
  for (const UnderwaterSample& s : dataset) {
    background.push_back(estimate_background_light(s.hazy, config.patch, kBackgroundFraction));
    hazy_psnr.push_back(psnr(s.hazy, s.clear));
  }
  const double psnr_hazy = median(hazy_psnr);

  const std::size_t n = dataset.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_order(n, derive_seed(config.seed, kStreamShuffle, epoch));
    double sum_rec = 0.0, sum_dcp = 0.0, sum_total = 0.0;
    int step = 0;
    for (std::size_t start = 0; start < n; start += batch, ++step) {
      const std::size_t stop = std::min(n, start + batch);
      DeblurModelGrads grads(model);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t k = order[b];
        const TotalLoss loss = selfsup_loss(model, dataset[k].hazy, background[k], config, &grads);
        require_finite(loss.total, "train_selfsup_deblur", epoch, step);
        sum_rec += loss.reconstruction;
        sum_dcp += loss.dcp;
        sum_total += loss.total;
      }
      TensorList g = grads.tensors();
      scale_all(g, 1.0 / static_cast<double>(stop - start));
      model.adam.step(model.deblur_tensors(), g, config.learning_rate);
    }

    std::vector<double> pred_psnr;
    for (const UnderwaterSample& s : dataset) {
      pred_psnr.push_back(psnr(clamp_unit(predict_clear(model, s.hazy)), s.clear));
    }
    const double count = static_cast<double>(n);
    result.metrics.records.push_back(
        {epoch, sum_rec / count, sum_dcp / count, sum_total / count, median(pred_psnr), psnr_hazy, 0.0});
  }
  return result;
}

// ----------------------------------------------------------- STN experiment

namespace {

std::vector<double> forward_logits(const ModelState& model, StnMode mode, const Grid& image,
                                   ExtractorTape& etape, StnTape& stape, ClassifierTape& ctape) {
  const Grid features = extract_features(image, model.extractor, etape);
  const Grid warped = stn_forward(features, model.loc, mode, stape);
  return classify(warped, model.classifier, ctape);
}

}  // namespace

double evaluate_accuracy(const ModelState& model, StnMode mode,
                         const std::vector<ShapeSample>& samples) {
  if (samples.empty()) return 0.0;
  int correct = 0;
  for (const ShapeSample& s : samples) {
    ExtractorTape etape;
    StnTape stape;
    ClassifierTape ctape;
    const std::vector<double> logits = forward_logits(model, mode, s.image, etape, stape, ctape);
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    if (best == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train_stn_classifier(StnMode mode, const TrainConfig& config, bool distort) {
  config.validate();
  const int size = config.image_size;
  const std::vector<ShapeSample> train =
      gen_shapes_dataset(config.num_images, size, distort, derive_seed(config.seed, kStreamTrainShapes));
  const std::vector<ShapeSample> test =
      gen_shapes_dataset(config.num_images, size, distort, derive_seed(config.seed, kStreamTestShapes));

  TrainResult result;
  ModelState& model = result.model;
  Rng rng(derive_seed(config.seed, kStreamInit));
  model.extractor = ExtractorParams::create(1, rng);
  const int fh = size / 4, fw = size / 4;
  model.loc = LocParams::create(kFeatureChannels, fh, fw, rng);
  model.classifier = ClassifierParams::create(kFeatureChannels, fh, fw, kShapeClasses, rng);

  const std::size_t n = train.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  std::uint64_t draw = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_order(n, derive_seed(config.seed, kStreamShuffle, epoch));
    double sum_loss = 0.0;
    int step = 0;
    for (std::size_t start = 0; start < n; start += batch, ++step) {
      const std::size_t stop = std::min(n, start + batch);
      StnGradients grads(model);
      for (std::size_t b = start; b < stop; ++b) {
        const ShapeSample& s = train[order[b]];
        ExtractorTape etape;
        StnTape stape;
        ClassifierTape ctape;
        ctape.dropout_rate = config.dropout_rate;
        ctape.dropout_seed = derive_seed(config.seed, kStreamDropout, draw++);
        ctape.training = true;
        const std::vector<double> logits = forward_logits(model, mode, s.image, etape, stape, ctape);
        const CrossEntropy ce = softmax_cross_entropy(logits, s.label);
        require_finite(ce.loss, "train_stn_classifier", epoch, step);
        sum_loss += ce.loss;

        const Grid gv = classify_backward(ctape, model.classifier, ce.grad, grads.classifier);
        StnGrads sg = stn_backward(stape, model.loc, gv);
        add_into(grads.loc, sg.params);
        extract_features_backward(etape, model.extractor, sg.features, grads.extractor);
      }
      TensorList g = grads.tensors();
      scale_all(g, 1.0 / static_cast<double>(stop - start));
      model.adam.step(model.stn_tensors(), g, config.learning_rate);
    }
    EpochRecord r;
    r.epoch = epoch;
    r.loss_total = sum_loss / static_cast<double>(n);
    r.accuracy = evaluate_accuracy(model, mode, test);
    result.metrics.records.push_back(r);
  }
  return result;
}

}  // namespace seaclear
