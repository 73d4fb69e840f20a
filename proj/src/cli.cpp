#include "seaclear/cli.hpp"

#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "seaclear/config.hpp"
#include "seaclear/dcp.hpp"
#include "seaclear/error.hpp"
#include "seaclear/gradient_suite.hpp"
#include "seaclear/imaging.hpp"
#include "seaclear/netpbm.hpp"
#include "seaclear/stn.hpp"
#include "seaclear/trainer.hpp"
#include "seaclear/weights.hpp"

namespace seaclear {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open for writing");
  f << text;
  if (!f) throw IoError(path + ": write failed");
}

TrainConfig config_or_default(const std::string& path) {
  return path.empty() ? TrainConfig::desk() : load_config(path);
}

struct SynthArgs {
  std::string clear, depth, out;
  std::vector<double> beta, background;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  const NetpbmImage clear = read_netpbm(a.clear);
  const Grid depth = depth_from_image(read_netpbm(a.depth));
  require_same_shape(Grid(1, clear.pixels.height(), clear.pixels.width()), depth, "synth: depth vs clear");
  const int channels = clear.pixels.channels();
  const AttenuationCoeff beta(a.beta);
  if (beta.channels() != 1 && beta.channels() != channels) {
    throw ParameterError("synth: --beta needs 1 or " + std::to_string(channels) + " values");
  }
  const BackgroundLight A(a.background);
  A.require_channels(channels, "synth: --bg");
  const Grid t = transmission_from_depth(depth, beta, channels);
  NetpbmImage hazy{synthesize_hazy(clear.pixels, t, A), clear.maxval, std::nullopt};
  write_netpbm(a.out, hazy);
  out << "mean transmission:";
  for (int c = 0; c < channels; ++c) {
    double s = 0.0;
    for (double v : t.plane(c)) s += v;
    out << ' ' << fixed(s / static_cast<double>(t.plane_size()), 4);
  }
  out << '\n';
}

struct DehazeArgs {
  std::string in, out, save_t;
  int patch = 15;
  double omega = 0.95;
};

void cmd_dehaze(const DehazeArgs& a, std::ostream& out) {
  const NetpbmImage img = read_netpbm(a.in);
  const Grid& hazy = img.pixels;
  const BackgroundLight A = estimate_background_light(hazy, a.patch, 0.001);
  const Grid t = estimate_transmission_dcp(hazy, A, a.patch, a.omega);
  Grid clear = recover_clear(compute_B(hazy, t, A), hazy);
  for (double& v : clear.values()) v = std::clamp(v, 0.0, 1.0);
  write_netpbm(a.out, {clear, img.maxval, std::nullopt});
  if (!a.save_t.empty()) write_netpbm(a.save_t, {t, img.maxval, std::nullopt});
  out << "background light:";
  for (int c = 0; c < hazy.channels(); ++c) out << ' ' << fixed(A[c], 4);
  out << '\n';
}

struct WarpArgs {
  std::string in, out;
  std::vector<double> theta;
};

void cmd_warp(const WarpArgs& a, std::ostream&) {
  if (a.theta.size() != 8) {
    throw ParameterError("warp: --theta needs 8 values (t11,t12,t13,t21,t22,t23,t31,t32), got " +
                         std::to_string(a.theta.size()));
  }
  const NetpbmImage img = read_netpbm(a.in);
  Homography h;
  std::copy(a.theta.begin(), a.theta.end(), h.theta.begin());
  const SamplingGrid grid = make_grid(h, img.pixels.height(), img.pixels.width());
  // a warped depth map keeps its units
  write_netpbm(a.out, {bilinear_sample(img.pixels, grid), img.maxval, img.depth_scale});
}

int cmd_gradcheck(std::ostream& out) {
  bool ok = true;
  for (const OpGradientResult& r : run_gradient_suite()) {
    char line[160];
    std::snprintf(line, sizeof line, "%-22s max rel err %.3e over %d seeds  %s\n", r.op.c_str(),
                  r.max_rel_error, r.seeds, r.passed() ? "ok" : "FAIL");
    out << line;
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitCheckFailed;
}

struct TrainArgs {
  std::string config, metrics, weights, mode = "perspective";
};

void cmd_train_deblur(const TrainArgs& a, std::ostream& out) {
  const TrainConfig config = config_or_default(a.config);
  TrainResult r = train_selfsup_deblur(config);
  write_text(a.metrics, r.metrics.to_csv());
  save_weights(a.weights, r.model.deblur_tensors());
  if (!r.metrics.records.empty()) {
    const EpochRecord& last = r.metrics.records.back();
    out << "epoch " << last.epoch << ": total loss " << fixed(last.loss_total, 6) << ", psnr "
        << fixed(last.psnr_pred, 2) << " dB (hazy input " << fixed(last.psnr_hazy, 2) << " dB)\n";
  }
}

void cmd_stn_demo(const TrainArgs& a, std::ostream& out) {
  const StnMode mode = parse_stn_mode(a.mode);
  const TrainConfig config = config_or_default(a.config);
  TrainResult r = train_stn_classifier(mode, config);
  write_text(a.metrics, r.metrics.to_csv());
  save_weights(a.weights, r.model.stn_tensors());
  if (!r.metrics.records.empty()) {
    out << "mode " << to_string(mode) << ": held-out accuracy "
        << fixed(r.metrics.records.back().accuracy, 4) << '\n';
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Underwater image restoration and perspective transformer toolkit", "seaclear"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* s = app.add_subcommand("synth", "Render a hazy image from a clear image and a depth map");
  s->add_option("--clear", synth.clear, "Clear image (PGM/PPM)")->required();
  s->add_option("--depth", synth.depth, "Depth map (16-bit PGM, '# depth-scale=' comment)")->required();
  s->add_option("--beta", synth.beta, "Attenuation per channel, r,g,b or one value")->required()->delimiter(',');
  s->add_option("--bg", synth.background, "Background light, r,g,b or one value")->required()->delimiter(',');
  s->add_option("--out", synth.out, "Output image")->required();

  DehazeArgs dehaze;
  CLI::App* d = app.add_subcommand("dehaze", "Dark-channel dehazing through the B(x) recovery");
  d->add_option("--in", dehaze.in, "Hazy image")->required();
  d->add_option("--patch", dehaze.patch, "Dark channel window (odd)")->capture_default_str();
  d->add_option("--omega", dehaze.omega, "Haze retention factor in (0, 1]")->capture_default_str();
  d->add_option("--out", dehaze.out, "Recovered image")->required();
  d->add_option("--save-t", dehaze.save_t, "Also write the transmission map");

  WarpArgs warp;
  CLI::App* w = app.add_subcommand("warp", "Warp an image by an eight-parameter homography");
  w->add_option("--in", warp.in, "Input image")->required();
  w->add_option("--theta", warp.theta, "t11,t12,t13,t21,t22,t23,t31,t32")->required()->delimiter(',');
  w->add_option("--out", warp.out, "Output image")->required();

  CLI::App* g = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");

  TrainArgs train;
  CLI::App* td = app.add_subcommand("train-deblur", "Self-supervised deblurring on synthetic scenes");
  td->add_option("--config", train.config, "key=value config (desk profile if omitted)");
  td->add_option("--metrics", train.metrics, "Metrics CSV")->default_val("deblur_metrics.csv");
  td->add_option("--weights", train.weights, "Weights file")->default_val("deblur_weights.dsow");

  TrainArgs stn;
  CLI::App* sd = app.add_subcommand("stn-demo", "Shape classification with a spatial transformer");
  sd->add_option("--mode", stn.mode, "none, affine or perspective")->capture_default_str();
  sd->add_option("--config", stn.config, "key=value config (desk profile if omitted)");
  sd->add_option("--metrics", stn.metrics, "Metrics CSV")->default_val("stn_metrics.csv");
  sd->add_option("--weights", stn.weights, "Weights file")->default_val("stn_weights.dsow");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) cmd_synth(synth, out);
    if (d->parsed()) cmd_dehaze(dehaze, out);
    if (w->parsed()) cmd_warp(warp, out);
    if (g->parsed()) return cmd_gradcheck(out);
    if (td->parsed()) cmd_train_deblur(train, out);
    if (sd->parsed()) cmd_stn_demo(stn, out);
    return kExitOk;
  } catch (const ParameterError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SingularTransformError& e) {
    err << "singular transform: " << e.what() << '\n';
    return kExitDomain;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const EvaluationError& e) {
    err << "evaluation error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace seaclear
