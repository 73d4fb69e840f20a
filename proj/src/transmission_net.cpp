#include "seaclear/transmission_net.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "seaclear/error.hpp"
#include "seaclear/imaging.hpp"
#include "seaclear/rng.hpp"

namespace seaclear {

TransNetParams TransNetParams::create(int image_channels, Rng& rng, const TransNetConfig& config) {
  TransNetParams p;
  int in = image_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    p.encoder[i] = ConvParams::same(config.encoder_channels[i], in, 3, 2);
    p.encoder[i].init_he(rng);
    in = config.encoder_channels[i];
  }
  for (std::size_t i = 0; i < 4; ++i) {
    p.decoder[i] = ConvParams::same(config.decoder_channels[i], in, 3, 1);
    p.decoder[i].init_he(rng);
    in = config.decoder_channels[i];
  }
  p.head = ConvParams::same(1, in, 1, 1);
  p.head.init_he(rng, 0.1);
  return p;
}

TransNetParams TransNetParams::zeros_like() const {
  TransNetParams z;
  for (std::size_t i = 0; i < 4; ++i) {
    z.encoder[i] = encoder[i].zeros_like();
    z.decoder[i] = decoder[i].zeros_like();
  }
  z.head = head.zeros_like();
  return z;
}

void TransNetParams::validate() const {
  const ConvParams* prev = nullptr;
  auto link = [&](const ConvParams& layer, const std::string& name) {
    layer.validate();
    if (prev != nullptr && prev->out_channels != layer.in_channels) {
      throw DimensionError("transmission branch: " + name + " expects " +
                           std::to_string(layer.in_channels) + " input channels, previous layer emits " +
                           std::to_string(prev->out_channels));
    }
    prev = &layer;
  };
  for (std::size_t i = 0; i < 4; ++i) {
    link(encoder[i], "encoder " + std::to_string(i));
    if (encoder[i].stride != 2 || encoder[i].kernel_h != 3 || encoder[i].kernel_w != 3 ||
        encoder[i].padding != 1) {
      throw DimensionError("transmission branch: encoder " + std::to_string(i) +
                           " must be a 3x3 stride-2 conv with padding 1");
    }
  }
  for (std::size_t i = 0; i < 4; ++i) {
    link(decoder[i], "decoder " + std::to_string(i));
    if (decoder[i].stride != 1 || decoder[i].kernel_h % 2 == 0 || decoder[i].kernel_w % 2 == 0 ||
        decoder[i].padding * 2 + 1 != decoder[i].kernel_h || decoder[i].kernel_h != decoder[i].kernel_w) {
      throw DimensionError("transmission branch: decoder " + std::to_string(i) +
                           " must be a same-padded stride-1 conv");
    }
  }
  link(head, "head");
  if (head.out_channels != 1 || head.kernel_h != 1 || head.kernel_w != 1) {
    throw DimensionError("transmission branch: head must be a 1x1 conv with one output channel");
  }
}

void TransNetParams::collect(const std::string& prefix, TensorList& out) {
  for (std::size_t i = 0; i < 4; ++i) {
    seaclear::collect(prefix + ".encoder" + std::to_string(i), encoder[i], out);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    seaclear::collect(prefix + ".decoder" + std::to_string(i), decoder[i], out);
  }
  seaclear::collect(prefix + ".head", head, out);
}

Grid predict_transmission(const Grid& image, const TransNetParams& params) {
  TransNetTape tape;
  return predict_transmission(image, params, tape);
}

Grid predict_transmission(const Grid& image, const TransNetParams& params, TransNetTape& tape) {
  params.validate();
  if (image.height() % 16 != 0 || image.width() % 16 != 0) {
    throw DimensionError("predict_transmission: height and width must be divisible by 16, got " +
                         image.shape_string());
  }
  Grid x = image;
  for (std::size_t i = 0; i < 4; ++i) x = conv_forward(x, params.encoder[i], true, tape.encoder[i]);
  for (std::size_t i = 0; i < 4; ++i) {
    x = bilinear_upsample(x, x.height() * 2, x.width() * 2);
    x = conv_forward(x, params.decoder[i], true, tape.decoder[i]);
  }
  Grid z = conv_forward(x, params.head, false, tape.head);
  for (double& v : z.values()) v = kTransmissionFloor + (1.0 - kTransmissionFloor) * sigmoid(v);
  tape.transmission = z;
  return z;
}

TransNetGrads predict_transmission_backward(const TransNetTape& tape, const TransNetParams& params,
                                            const Grid& grad_t) {
  require_same_shape(tape.transmission, grad_t, "predict_transmission_backward");
  TransNetGrads g{params.zeros_like(), Grid()};
  // dt/dz = (1 - floor)·σ'(z), and σ(z) = (t - floor)/(1 - floor).
  Grid gz = grad_t;
  for (std::size_t i = 0; i < gz.size(); ++i) {
    const double s = (tape.transmission[i] - kTransmissionFloor) / (1.0 - kTransmissionFloor);
    gz[i] *= (1.0 - kTransmissionFloor) * s * (1.0 - s);
  }
  Grid gx = conv_backward(tape.head, params.head, false, gz, g.params.head);
  for (int i = 3; i >= 0; --i) {
    gx = conv_backward(tape.decoder[i], params.decoder[i], true, gx, g.params.decoder[i]);
    gx = bilinear_upsample_backward(gx, gx.height() / 2, gx.width() / 2);
  }
  for (int i = 3; i >= 0; --i) {
    gx = conv_backward(tape.encoder[i], params.encoder[i], true, gx, g.params.encoder[i]);
  }
  g.image = std::move(gx);
  return g;
}

double kink_distance(const TransNetTape& tape) {
  double m = std::numeric_limits<double>::infinity();
  for (const ConvCache& c : tape.encoder) m = std::min(m, kink_distance(c));
  for (const ConvCache& c : tape.decoder) m = std::min(m, kink_distance(c));
  return m;
}

}  // namespace seaclear
