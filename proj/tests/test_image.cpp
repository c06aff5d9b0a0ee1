#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "dataset.hpp"
#include "image.hpp"
#include "support.hpp"

using namespace udehaze;
using testsupport::procedural_image;
using testsupport::TempDir;

TEST_CASE("ppm decoding") {
  // 2x2 all-black
  std::vector<uint8_t> ppm{'P', '6', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n'};
  ppm.insert(ppm.end(), 12, 0);
  ImageRGB img = decode_ppm(ppm, "test");
  CHECK(img.height == 2);
  CHECK(img.width == 2);
  for (double v : img.values) CHECK(v == 0.0);

  // declared byte conversion
  std::vector<uint8_t> one{'P', '6', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n',
                           255, 128, 0};
  ImageRGB px = decode_ppm(one, "test");
  CHECK(px.values[0] == 1.0);
  CHECK(px.values[1] == 128.0 / 255.0);
  CHECK(px.values[2] == 0.0);

  // comments in the header
  std::vector<uint8_t> commented;
  const std::string header = "P6\n# a comment\n1 1\n255\n";
  commented.assign(header.begin(), header.end());
  commented.insert(commented.end(), {10, 20, 30});
  CHECK(decode_ppm(commented, "test").values[1] == 20.0 / 255.0);

  // truncated raster
  std::vector<uint8_t> trunc{'P', '6', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 1, 2};
  CHECK_THROWS_WITH_AS(decode_ppm(trunc, "test"), doctest::Contains("truncated"),
                       std::runtime_error);
}

TEST_CASE("save/load round trips") {
  TempDir dir("imageio");
  ImageRGB img = procedural_image(3, 9, 7);

  SUBCASE("ppm is bit-exact after one quantization") {
    const std::string path = dir.sub("img.ppm");
    save_image(img, path);
    ImageRGB back = load_image(path);
    double max_err = 0.0;
    for (size_t i = 0; i < img.values.size(); ++i) {
      max_err = std::max(max_err, std::fabs(back.values[i] - img.values[i]));
    }
    CHECK(max_err <= 0.5 / 255.0);

    // second round trip reproduces the file exactly
    save_image(back, dir.sub("img2.ppm"));
    ImageRGB again = load_image(dir.sub("img2.ppm"));
    CHECK(again.values == back.values);
  }

  SUBCASE("png matches ppm content") {
    save_image(img, dir.sub("img.png"));
    save_image(img, dir.sub("img.ppm"));
    ImageRGB png = load_image(dir.sub("img.png"));
    ImageRGB ppm = load_image(dir.sub("img.ppm"));
    REQUIRE(png.height == ppm.height);
    CHECK(png.values == ppm.values);
  }

  SUBCASE("unsupported format is a descriptive error") {
    std::ofstream(dir.sub("bogus.ppm")) << "JUNKDATA";
    CHECK_THROWS_WITH_AS(load_image(dir.sub("bogus.ppm")),
                         doctest::Contains("unsupported"), std::runtime_error);
    CHECK_THROWS(load_image(dir.sub("missing.ppm")));
  }
}

TEST_CASE("bilinear resize") {
  ImageRGB img = procedural_image(5, 6, 6);
  ImageRGB same = resize_bilinear(img, 6, 6);
  CHECK(same.values == img.values);

  ImageRGB constant(4, 4, 0.37);
  ImageRGB grown = resize_bilinear(constant, 9, 5);
  for (double v : grown.values) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));

  // 4x4 ramp down to 2x2: with align-corners=false and scale 2, each output
  // pixel is the mean of its 2x2 quadrant.
  ImageRGB ramp(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) ramp.at(y, x, c) = (y * 4 + x) / 15.0;
  ImageRGB small = resize_bilinear(ramp, 2, 2);
  for (int py = 0; py < 2; ++py) {
    for (int px = 0; px < 2; ++px) {
      double expect = 0.0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          expect += ramp.at(2 * py + dy, 2 * px + dx, 0);
      expect *= 0.25;
      CHECK(std::fabs(small.at(py, px, 0) - expect) < 1e-12);
    }
  }
}

TEST_CASE("image/tensor layout conversion round trips") {
  ImageRGB img = procedural_image(11, 8, 10);
  auto t = image_to_tensor(img);
  REQUIRE(t->shape == std::vector<int64_t>{1, 3, 8, 10});
  ImageRGB back = tensor_to_image(*t);
  CHECK(back.values == img.values);
}

TEST_CASE("paired dataset loading") {
  TempDir dir("pairs");
  std::filesystem::create_directories(dir.sub("input"));
  std::filesystem::create_directories(dir.sub("reference"));

  SUBCASE("empty directories give an empty list") {
    CHECK(load_paired_dataset(dir.sub("input"), dir.sub("reference"), 0).empty());
  }

  SUBCASE("matched pairs come back in filename order") {
    for (const char* name : {"c", "a", "b"}) {
      ImageRGB img = procedural_image(name[0], 16, 16);
      save_image(img, dir.sub("input") + "/" + name + ".ppm");
      save_image(img, dir.sub("reference") + "/" + name + ".ppm");
    }
    auto samples = load_paired_dataset(dir.sub("input"), dir.sub("reference"), 0);
    REQUIRE(samples.size() == 3);
    CHECK(samples[0].id == "a");
    CHECK(samples[1].id == "b");
    CHECK(samples[2].id == "c");

    auto resized = load_paired_dataset(dir.sub("input"), dir.sub("reference"), 32);
    CHECK(resized[0].input.height == 32);
    CHECK(resized[0].reference.width == 32);
  }

  SUBCASE("an orphan is named in the error") {
    save_image(procedural_image(1, 8, 8), dir.sub("input") + "/orphan.ppm");
    CHECK_THROWS_WITH_AS(load_paired_dataset(dir.sub("input"), dir.sub("reference"), 0),
                         doctest::Contains("orphan"), std::runtime_error);
  }

  SUBCASE("cross-extension matching works by stem") {
    ImageRGB img = procedural_image(9, 12, 12);
    save_image(img, dir.sub("input") + "/x.ppm");
    save_image(img, dir.sub("reference") + "/x.png");
    auto samples = load_paired_dataset(dir.sub("input"), dir.sub("reference"), 0);
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].id == "x");
  }
}

TEST_CASE("synthetic scenes") {
  ImageRGB clean = procedural_image(21, 24, 24);

  SUBCASE("zero attenuation leaves the image untouched") {
    SynthParams p;
    p.beta_true = {0.0, 0.0, 0.0};
    SynthScene s = synthesize_scene(clean, 5, p);
    for (size_t i = 0; i < clean.values.size(); ++i) {
      CHECK(s.degraded.values[i] == doctest::Approx(clean.values[i]).epsilon(1e-15));
    }
  }

  SUBCASE("constant depth ln(2) with beta_R = 1 halves the red transmission") {
    SynthParams p;
    p.depth_lo = p.depth_hi = std::log(2.0);
    p.beta_true = {1.0, 0.5, 0.25};
    SynthScene s = synthesize_scene(clean, 5, p);
    for (double d : s.depth) CHECK(d == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    for (size_t px = 0; px < clean.pixel_count(); ++px) {
      const double expect = 0.5 * clean.values[px * 3] + 0.5 * p.a_true[0];
      CHECK(s.degraded.values[px * 3] == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  SUBCASE("same seed gives bitwise-identical scenes") {
    SynthParams p;
    SynthScene s1 = synthesize_scene(clean, 77, p);
    SynthScene s2 = synthesize_scene(clean, 77, p);
    CHECK(s1.degraded.values == s2.degraded.values);
    CHECK(s1.depth == s2.depth);
    SynthScene s3 = synthesize_scene(clean, 78, p);
    CHECK(s1.depth != s3.depth);
  }

  SUBCASE("depth stays in the declared range") {
    SynthScene s = synthesize_scene(clean, 123, SynthParams{});
    for (double d : s.depth) {
      CHECK(d >= 0.5);
      CHECK(d <= 8.0);
    }
  }

  SUBCASE("inverting with the true transmission recovers the clean image") {
    SynthParams p;
    SynthScene s = synthesize_scene(clean, 9, p);
    double max_err = 0.0;
    for (size_t px = 0; px < clean.pixel_count(); ++px) {
      const double d = s.depth[px];
      for (int c = 0; c < 3; ++c) {
        const double t = std::exp(-p.beta_true[c] * d);
        const double degraded = s.degraded.values[px * 3 + c];
        // skip pixels clamped during synthesis
        if (degraded <= 0.0 || degraded >= 1.0) continue;
        const double recovered = (degraded - p.a_true[c] * (1.0 - t)) / t;
        max_err = std::max(max_err, std::fabs(recovered - clean.values[px * 3 + c]));
      }
    }
    CHECK(max_err < 1e-6);
  }
}

TEST_CASE("synthetic dataset writer is deterministic") {
  TempDir dir("synth");
  std::filesystem::create_directories(dir.sub("clean"));
  for (int i = 0; i < 3; ++i) {
    save_image(procedural_image(40 + i, 32, 32),
               dir.sub("clean") + "/img" + std::to_string(i) + ".ppm");
  }

  SynthDatasetOptions opts;
  opts.clean_dir = dir.sub("clean");
  opts.out_dir = dir.sub("outA");
  opts.count = 5;  // cycles over the 3 clean images
  opts.seed = 31;
  write_synth_dataset(opts);
  opts.out_dir = dir.sub("outB");
  write_synth_dataset(opts);

  auto a = load_paired_dataset(dir.sub("outA") + "/input", dir.sub("outA") + "/reference", 0);
  auto b = load_paired_dataset(dir.sub("outB") + "/input", dir.sub("outB") + "/reference", 0);
  REQUIRE(a.size() == 5);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].input.values == b[i].input.values);
    CHECK(a[i].reference.values == b[i].reference.values);
  }
  CHECK(std::filesystem::exists(dir.sub("outA") + "/truth.json"));

  SUBCASE("count 0 writes an empty dataset with an empty truth list") {
    SynthDatasetOptions empty;
    empty.clean_dir = dir.sub("clean");
    empty.out_dir = dir.sub("empty");
    empty.count = 0;
    const std::string truth = write_synth_dataset(empty);
    CHECK(truth.find("\"scenes\": []") != std::string::npos);
    CHECK(load_paired_dataset(dir.sub("empty") + "/input",
                              dir.sub("empty") + "/reference", 0)
              .empty());
  }
}
