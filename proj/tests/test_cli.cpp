#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "seaclear/cli.hpp"
#include "seaclear/config.hpp"
#include "seaclear/error.hpp"
#include "seaclear/netpbm.hpp"
#include "seaclear/stn.hpp"
#include "seaclear/trainer.hpp"
#include "seaclear/weights.hpp"
#include "test_support.hpp"

using namespace seaclear;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SEACLEAR_FIXTURE_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE_MESSAGE(f, "cannot open " << p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f << bytes;
}

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  Scratch() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("seaclear_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return (kFixtures / name).string(); }

Grid constant_grid(int c, int h, int w, double v) {
  Grid g(c, h, w);
  for (double& x : g.values()) x = v;
  return g;
}

}  // namespace

TEST_CASE("netpbm encoding") {
  Rng rng(3);
  SUBCASE("8-bit round trip is byte exact") {
    std::string bytes = "P6\n5 4\n255\n";
    for (int i = 0; i < 60; ++i) bytes.push_back(static_cast<char>(rng.below(256)));
    const NetpbmImage img = decode_netpbm(bytes);
    CHECK(img.pixels.channels() == 3);
    CHECK(img.pixels.height() == 4);
    CHECK(img.pixels.width() == 5);
    CHECK(encode_netpbm(img) == bytes);
  }
  SUBCASE("16-bit samples are big-endian") {
    const std::string bytes = std::string("P5\n2 1\n65535\n") + '\x01' + '\x02' + '\xff' + '\xfe';
    const NetpbmImage img = decode_netpbm(bytes);
    CHECK(img.pixels[0] * 65535.0 == doctest::Approx(258.0).epsilon(1e-15));
    CHECK(img.pixels[1] * 65535.0 == doctest::Approx(65534.0).epsilon(1e-15));
    CHECK(encode_netpbm(img) == bytes);
  }
  SUBCASE("comments and arbitrary whitespace in the header") {
    const std::string bytes = std::string("P5 # c\n# more\n 2\t1 \n7\n") + '\x03' + '\x07';
    const NetpbmImage img = decode_netpbm(bytes);
    CHECK(img.maxval == 7);
    CHECK(img.pixels[0] == 3.0 / 7.0);
    CHECK(img.pixels[1] == 1.0);
  }
  SUBCASE("quantization rounds halves away from zero and clamps") {
    CHECK(quantize_sample(127.5 / 255.0, 255) == 128);
    CHECK(quantize_sample(127.49 / 255.0, 255) == 127);
    CHECK(quantize_sample(0.5 / 255.0, 255) == 1);
    CHECK(quantize_sample(-0.3, 255) == 0);
    CHECK(quantize_sample(1.7, 255) == 255);
    CHECK(quantize_sample(0.5, 1) == 1);
  }
  SUBCASE("depth scale comment") {
    NetpbmImage with = decode_netpbm(std::string("P5\n# depth-scale=0.002\n1 1\n65535\n") + '\x03' + '\xe8');
    REQUIRE(with.depth_scale);
    CHECK(*with.depth_scale == 0.002);
    CHECK(depth_from_image(with)[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(decode_netpbm(encode_netpbm(with)).depth_scale == with.depth_scale);

    NetpbmImage without = decode_netpbm(std::string("P5\n1 1\n255\n") + '\x05');
    CHECK_FALSE(without.depth_scale);
    CHECK(depth_from_image(without)[0] == doctest::Approx(5.0).epsilon(1e-12));

    const Grid depth = constant_grid(1, 2, 3, 1.25);
    const NetpbmImage enc = depth_to_image(depth, 0.001);
    CHECK(enc.maxval == 65535);
    CHECK(depth_from_image(enc)[4] == doctest::Approx(1.25).epsilon(1e-12));
    CHECK_THROWS_AS(depth_to_image(constant_grid(1, 1, 1, -1.0), 0.001), DomainError);
    CHECK_THROWS_AS(depth_to_image(constant_grid(1, 1, 1, 70.0), 0.001), DomainError);
    CHECK_THROWS_AS(depth_from_image(decode_netpbm(std::string("P6\n1 1\n255\n") + "abc")),
                    DimensionError);
  }
  SUBCASE("malformed files") {
    CHECK_THROWS_AS(decode_netpbm("P3\n1 1\n255\n1"), IoError);
    CHECK_THROWS_AS(decode_netpbm("P5\n2 2\n255\nab"), IoError);
    CHECK_THROWS_AS(decode_netpbm("P5\n1 1\n0\na"), IoError);
    CHECK_THROWS_AS(decode_netpbm("P5\n1 1\n70000\nab"), IoError);
    CHECK_THROWS_AS(decode_netpbm("P5\n1 1\n7\n\x09"), IoError);  // sample above maxval
    CHECK_THROWS_AS(decode_netpbm(""), IoError);
    CHECK_THROWS_AS(read_netpbm("/nonexistent/x.pgm"), IoError);
    CHECK_THROWS_AS(encode_netpbm({Grid(2, 1, 1), 255, std::nullopt}), DimensionError);
  }
}

TEST_CASE("weights file") {
  std::vector<double> a{1.5, -2.25, 3e-300, std::nextafter(1.0, 2.0)}, b{42.0};
  TensorList tensors{{"layer.weight", {2, 2}, &a}, {"layer.bias", {1}, &b}};
  const std::string bytes = encode_weights(tensors);
  CHECK(bytes.substr(0, 4) == "DSOW");
  CHECK(bytes.size() == 4 + 4 + 4 + (2 + 12 + 1 + 8 + 32) + (2 + 10 + 1 + 4 + 8));

  const std::vector<StoredTensor> back = decode_weights(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "layer.weight");
  CHECK(back[0].dims == std::vector<std::uint32_t>{2, 2});
  CHECK(back[0].values == a);
  CHECK(back[1].values == b);

  Scratch tmp;
  save_weights(tmp / "w.dsow", tensors);
  std::vector<double> a2(4), b2(1);
  load_weights(tmp / "w.dsow", {{"layer.weight", {2, 2}, &a2}, {"layer.bias", {1}, &b2}});
  CHECK(a2 == a);
  CHECK(b2 == b);

  CHECK_THROWS_AS(load_weights(tmp / "w.dsow", {{"other", {2, 2}, &a2}, {"layer.bias", {1}, &b2}}),
                  DimensionError);
  CHECK_THROWS_AS(load_weights(tmp / "w.dsow", {{"layer.weight", {4}, &a2}, {"layer.bias", {1}, &b2}}),
                  DimensionError);
  CHECK_THROWS_AS(decode_weights(bytes.substr(0, bytes.size() - 1)), IoError);
  CHECK_THROWS_AS(decode_weights(bytes + "x"), IoError);
  CHECK_THROWS_AS(decode_weights("XXXX" + bytes.substr(4)), IoError);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode_weights(bad_version), IoError);
  CHECK_THROWS_AS(read_weights(tmp / "missing.dsow"), IoError);
}

TEST_CASE("run config") {
  SUBCASE("defaults, comments and whitespace") {
    const TrainConfig c = parse_config("# comment\n  learning_rate = 0.01  # trailing\n\nseed=7\n");
    CHECK(c.learning_rate == 0.01);
    CHECK(c.seed == 7);
    CHECK(c.epochs == TrainConfig{}.epochs);
  }
  SUBCASE("parse, serialize, parse is a fixed point") {
    TrainConfig c;
    c.learning_rate = 0.1 + 0.2;  // not exactly representable in short decimal
    c.dropout_rate = 1.0 / 3.0;
    c.lambda_dcp = 0.07;
    c.seed = 18446744073709551615ull;
    const std::string once = serialize_config(c);
    const TrainConfig parsed = parse_config(once);
    CHECK(parsed.learning_rate == c.learning_rate);
    CHECK(parsed.dropout_rate == c.dropout_rate);
    CHECK(parsed.seed == c.seed);
    CHECK(serialize_config(parsed) == once);
    CHECK(serialize_config(parse_config(serialize_config(TrainConfig::full()))) ==
          serialize_config(TrainConfig::full()));
  }
  SUBCASE("profiles") {
    const TrainConfig p = parse_config("profile=full\nepochs=3\n");
    CHECK(p.learning_rate == TrainConfig::full().learning_rate);
    CHECK(p.epochs == 3);
    CHECK_THROWS_AS(parse_config("epochs=3\nprofile=full\n"), ParameterError);
    CHECK_THROWS_AS(parse_config("profile=huge\n"), ParameterError);
  }
  SUBCASE("rejections") {
    CHECK_THROWS_WITH_AS(parse_config("epochs=3\nwarmup=2\n"), doctest::Contains("line 2"), ParameterError);
    CHECK_THROWS_AS(parse_config("epochs=3\nepochs=4\n"), ParameterError);
    CHECK_THROWS_AS(parse_config("epochs\n"), ParameterError);
    CHECK_THROWS_AS(parse_config("epochs=3.5\n"), ParameterError);
    CHECK_THROWS_AS(parse_config("learning_rate=abc\n"), ParameterError);
    CHECK_THROWS_AS(parse_config("patch=4\n"), ParameterError);
    CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), IoError);
  }
}

TEST_CASE("golden: synth") {
  Scratch tmp;
  const Run r = cli({"synth", "--clear", fixture("clear.ppm"), "--depth", fixture("depth.pgm"),
                     "--beta", "0.35,0.2,0.1", "--bg", "0.15,0.55,0.7", "--out", tmp / "hazy.ppm"});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  CHECK(slurp(tmp / "hazy.ppm") == slurp(fixture("synth_hazy.ppm")));
  CHECK(r.out == slurp(fixture("synth_stdout.txt")));
}

TEST_CASE("golden: dehaze") {
  Scratch tmp;
  const Run r = cli({"dehaze", "--in", fixture("synth_hazy.ppm"), "--patch", "5", "--omega", "0.85",
                     "--out", tmp / "j.ppm", "--save-t", tmp / "t.pgm"});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  CHECK(slurp(tmp / "j.ppm") == slurp(fixture("dehaze_clear.ppm")));
  CHECK(slurp(tmp / "t.pgm") == slurp(fixture("dehaze_t.pgm")));
  CHECK(r.out == slurp(fixture("dehaze_stdout.txt")));
}

TEST_CASE("golden: warp") {
  Scratch tmp;
  const std::string theta = "0.9,0.1,0.05,-0.08,1.05,-0.1,0.2,-0.15";
  Run r = cli({"warp", "--in", fixture("clear.ppm"), "--theta", theta, "--out", tmp / "w.ppm"});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  CHECK(slurp(tmp / "w.ppm") == slurp(fixture("warp_clear.ppm")));

  r = cli({"warp", "--in", fixture("depth.pgm"), "--theta", theta, "--out", tmp / "w.pgm"});
  REQUIRE(r.code == kExitOk);
  CHECK(slurp(tmp / "w.pgm") == slurp(fixture("warp_depth.pgm")));
}

TEST_CASE("synth behaviour") {
  Scratch tmp;
  SUBCASE("zero attenuation reproduces the clear image") {
    const Run r = cli({"synth", "--clear", fixture("clear.ppm"), "--depth", fixture("depth.pgm"),
                       "--beta", "0,0,0", "--bg", "0.15,0.55,0.7", "--out", tmp / "o.ppm"});
    REQUIRE(r.code == kExitOk);
    CHECK(slurp(tmp / "o.ppm") == slurp(fixture("clear.ppm")));
    CHECK(r.out == "mean transmission: 1.0000 1.0000 1.0000\n");
  }
  SUBCASE("uniform depth 2 with beta 0.5") {
    write_netpbm(tmp / "d.pgm", depth_to_image(constant_grid(1, 6, 5, 2.0), 0.001));
    write_netpbm(tmp / "c.ppm", {constant_grid(3, 6, 5, 0.4), 255, std::nullopt});
    const Run r = cli({"synth", "--clear", tmp / "c.ppm", "--depth", tmp / "d.pgm", "--beta", "0.5",
                       "--bg", "0.2", "--out", tmp / "o.ppm"});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out == "mean transmission: 0.3679 0.3679 0.3679\n");
  }
  SUBCASE("errors") {
    CHECK(cli({"synth", "--clear", fixture("clear.ppm"), "--beta", "0.1", "--bg", "0.5", "--out",
               tmp / "o.ppm"}).code == kExitUsage);
    CHECK(cli({"synth", "--clear", fixture("clear.ppm"), "--depth", fixture("depth.pgm"), "--beta",
               "0.1,0.2", "--bg", "0.5", "--out", tmp / "o.ppm"}).code == kExitUsage);
    CHECK(cli({"synth", "--clear", fixture("clear.ppm"), "--depth", fixture("depth.pgm"), "--beta",
               "-0.1", "--bg", "0.5", "--out", tmp / "o.ppm"}).code == kExitDomain);
    CHECK(cli({"synth", "--clear", fixture("clear.ppm"), "--depth", fixture("clear.ppm"), "--beta",
               "0.1", "--bg", "0.5", "--out", tmp / "o.ppm"}).code == kExitDomain);
    const Run missing = cli({"synth", "--clear", tmp / "nope.ppm", "--depth", fixture("depth.pgm"),
                             "--beta", "0.1", "--bg", "0.5", "--out", tmp / "o.ppm"});
    CHECK(missing.code == kExitIo);
    CHECK(missing.err.find("nope.ppm") != std::string::npos);
  }
}

TEST_CASE("dehaze behaviour") {
  Scratch tmp;
  SUBCASE("constant image stays constant") {
    write_netpbm(tmp / "c.ppm", {constant_grid(3, 9, 11, 0.6), 255, std::nullopt});
    // omega 0.5: A equals the constant and t = 1 - omega
    Run r = cli({"dehaze", "--in", tmp / "c.ppm", "--omega", "0.5", "--patch", "3", "--out",
                 tmp / "j.ppm", "--save-t", tmp / "t.pgm"});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out == "background light: 0.6000 0.6000 0.6000\n");
    CHECK(slurp(tmp / "j.ppm") == slurp(tmp / "c.ppm"));
    const NetpbmImage t = read_netpbm(tmp / "t.pgm");
    for (double v : t.pixels.values()) CHECK(v == 128.0 / 255.0);

    // default omega 0.95 puts 1 - omega under the transmission floor; the
    // output is still the constant
    r = cli({"dehaze", "--in", tmp / "c.ppm", "--out", tmp / "j2.ppm"});
    REQUIRE(r.code == kExitOk);
    CHECK(slurp(tmp / "j2.ppm") == slurp(tmp / "c.ppm"));
  }
  SUBCASE("recovery beats the hazy input on the fixture") {
    REQUIRE(cli({"dehaze", "--in", fixture("synth_hazy.ppm"), "--patch", "5", "--omega", "0.85",
                 "--out", tmp / "j.ppm"}).code == kExitOk);
    const Grid truth = read_netpbm(fixture("clear.ppm")).pixels;
    const double hazy = psnr(read_netpbm(fixture("synth_hazy.ppm")).pixels, truth);
    const double recovered = psnr(read_netpbm(tmp / "j.ppm").pixels, truth);
    CHECK(recovered >= hazy);
  }
  SUBCASE("parameter errors") {
    CHECK(cli({"dehaze", "--in", fixture("synth_hazy.ppm"), "--omega", "1.2", "--out",
               tmp / "j.ppm"}).code == kExitUsage);
    CHECK(cli({"dehaze", "--in", fixture("synth_hazy.ppm"), "--patch", "4", "--out",
               tmp / "j.ppm"}).code == kExitUsage);
    CHECK(cli({"dehaze", "--in", fixture("synth_hazy.ppm"), "--out", "/nonexistent/dir/j.ppm"}).code ==
          kExitIo);
  }
}

TEST_CASE("warp behaviour") {
  Scratch tmp;
  SUBCASE("identity is byte identical") {
    for (const char* name : {"clear.ppm", "depth.pgm"}) {
      CAPTURE(name);
      REQUIRE(cli({"warp", "--in", fixture(name), "--theta", "1,0,0,0,1,0,0,0", "--out",
                   tmp / "o"}).code == kExitOk);
      CHECK(slurp(tmp / "o") == slurp(fixture(name)));
    }
  }
  SUBCASE("translation by 2/(W-1) shifts one pixel") {
    const NetpbmImage in = read_netpbm(fixture("clear.ppm"));
    const int W = in.pixels.width(), H = in.pixels.height();
    char theta[128];
    std::snprintf(theta, sizeof theta, "1,0,%.17g,0,1,0,0,0", 2.0 / (W - 1));
    REQUIRE(cli({"warp", "--in", fixture("clear.ppm"), "--theta", theta, "--out", tmp / "o.ppm"}).code ==
            kExitOk);
    const Grid out = read_netpbm(tmp / "o.ppm").pixels;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < H; ++i) {
        for (int j = 0; j + 1 < W; ++j) CHECK(out(c, i, j) == in.pixels(c, i, j + 1));
        CHECK(out(c, i, W - 1) == 0.0);
      }
  }
  SUBCASE("horizon crossing") {
    const Run r = cli({"warp", "--in", fixture("clear.ppm"), "--theta", "1,0,0,0,1,0,-2,0", "--out",
                       tmp / "o.ppm"});
    CHECK(r.code == kExitDomain);
    CHECK(r.err.find("singular transform") != std::string::npos);
    CHECK_FALSE(fs::exists(tmp / "o.ppm"));
  }
  SUBCASE("wrong parameter count") {
    CHECK(cli({"warp", "--in", fixture("clear.ppm"), "--theta", "1,0,0", "--out", tmp / "o.ppm"}).code ==
          kExitUsage);
  }
}

TEST_CASE("command surface") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  const Run help = cli({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("dehaze") != std::string::npos);
  CHECK(cli({"stn-demo", "--mode", "conformal"}).code == kExitUsage);
}

TEST_CASE("training commands") {
  Scratch tmp;
  SUBCASE("train-deblur with zero epochs writes a header-only csv") {
    spit(tmp / "run.cfg", "epochs=0\nimage_size=16\nnum_images=2\nbatch_size=2\n");
    const Run r = cli({"train-deblur", "--config", tmp / "run.cfg", "--metrics", tmp / "m.csv",
                       "--weights", tmp / "w.dsow"});
    INFO(r.err);
    REQUIRE(r.code == kExitOk);
    CHECK(slurp(tmp / "m.csv") == "epoch,loss_rec,loss_dcp,loss_total,psnr_pred,psnr_hazy,accuracy\n");
    // the weights are the initialization for this seed
    TrainConfig config = load_config(tmp / "run.cfg");
    ModelState init = init_deblur_model(config);
    std::string expected = encode_weights(init.deblur_tensors());
    CHECK(slurp(tmp / "w.dsow") == expected);
  }
  SUBCASE("train-deblur weights reload into a fresh model") {
    spit(tmp / "run.cfg", "epochs=1\nimage_size=16\nnum_images=2\nbatch_size=2\n");
    REQUIRE(cli({"train-deblur", "--config", tmp / "run.cfg", "--metrics", tmp / "m.csv", "--weights",
                 tmp / "w.dsow"}).code == kExitOk);
    ModelState fresh = init_deblur_model(load_config(tmp / "run.cfg"));
    load_weights(tmp / "w.dsow", fresh.deblur_tensors());
    CHECK(encode_weights(fresh.deblur_tensors()) == slurp(tmp / "w.dsow"));
  }
  SUBCASE("stn-demo is deterministic") {
    spit(tmp / "run.cfg", "epochs=2\nimage_size=16\nnum_images=6\nbatch_size=3\ndropout_rate=0.3\n");
    for (const char* mode : {"none", "affine", "perspective"}) {
      CAPTURE(mode);
      REQUIRE(cli({"stn-demo", "--mode", mode, "--config", tmp / "run.cfg", "--metrics", tmp / "a.csv",
                   "--weights", tmp / "a.dsow"}).code == kExitOk);
      REQUIRE(cli({"stn-demo", "--mode", mode, "--config", tmp / "run.cfg", "--metrics", tmp / "b.csv",
                   "--weights", tmp / "b.dsow"}).code == kExitOk);
      CHECK(slurp(tmp / "a.csv") == slurp(tmp / "b.csv"));
      CHECK(slurp(tmp / "a.dsow") == slurp(tmp / "b.dsow"));
    }
  }
  SUBCASE("config problems") {
    spit(tmp / "bad.cfg", "epochs=1\nmomentum=0.9\n");
    const Run r = cli({"train-deblur", "--config", tmp / "bad.cfg"});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("momentum") != std::string::npos);
    CHECK(cli({"train-deblur", "--config", tmp / "absent.cfg"}).code == kExitIo);
  }
}

TEST_CASE("gradcheck command") {
  const Run r = cli({"gradcheck"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("total_loss") != std::string::npos);
}
