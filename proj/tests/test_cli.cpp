// Drives the installed CLI binary as a subprocess. The binary path arrives
// via the UDEHAZE_CLI compile definition set in CMake.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nets.hpp"
#include "support.hpp"

using namespace udehaze;
using nlohmann::json;
using testsupport::procedural_image;
using testsupport::TempDir;

#ifndef UDEHAZE_CLI
#error "UDEHAZE_CLI must point at the CLI binary"
#endif

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args, const std::string& scratch) {
  const std::string out_file = scratch + "/cli_stdout.txt";
  const std::string cmd = std::string(UDEHAZE_CLI) + " " + args + " > " + out_file +
                          " 2> " + scratch + "/cli_stderr.txt";
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::vector<uint8_t> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
}

json file_json(const std::string& path) {
  const auto bytes = file_bytes(path);
  return json::parse(bytes.begin(), bytes.end());
}

void write_clean_images(const std::string& dir, int count) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "c%03d.ppm", i);
    save_image(procedural_image(500 + i, 32, 32), dir + "/" + name);
  }
}

}  // namespace

TEST_CASE("exit codes") {
  TempDir dir("cli_exit");
  CHECK(run_cli("--definitely-not-a-flag", dir.str()).exit_code == 1);
  CHECK(run_cli("inspect", dir.str()).exit_code == 1);  // missing required flag
  CHECK(run_cli("inspect --input /nonexistent.ppm", dir.str()).exit_code == 2);
  CHECK(run_cli("--help", dir.str()).exit_code == 0);
}

TEST_CASE("synthesize subcommand") {
  TempDir dir("cli_synth");
  write_clean_images(dir.sub("clean"), 4);

  SUBCASE("count 0 writes an empty dataset") {
    auto r = run_cli("synthesize --clean-dir " + dir.sub("clean") + " --out-dir " +
                         dir.sub("empty") + " --count 0",
                     dir.str());
    CHECK(r.exit_code == 0);
    json truth = file_json(dir.sub("empty") + "/truth.json");
    CHECK(truth["scenes"].empty());
  }

  SUBCASE("same seed gives a bit-identical dataset") {
    const std::string base = "synthesize --clean-dir " + dir.sub("clean") +
                             " --count 3 --seed 42 --out-dir ";
    CHECK(run_cli(base + dir.sub("a"), dir.str()).exit_code == 0);
    CHECK(run_cli(base + dir.sub("b"), dir.str()).exit_code == 0);
    for (const char* name : {"input/scene_0000.ppm", "reference/scene_0002.ppm",
                             "truth.json"}) {
      CHECK(file_bytes(dir.sub("a") + "/" + name) == file_bytes(dir.sub("b") + "/" + name));
    }
  }

  SUBCASE("zero attenuation degrades nothing at 8-bit precision") {
    auto r = run_cli("synthesize --clean-dir " + dir.sub("clean") + " --out-dir " +
                         dir.sub("noop") + " --count 2 --beta 0,0,0 --atmos 0.5,0.6,0.7",
                     dir.str());
    CHECK(r.exit_code == 0);
    CHECK(file_bytes(dir.sub("noop") + "/input/scene_0000.ppm") ==
          file_bytes(dir.sub("noop") + "/reference/scene_0000.ppm"));
  }
}

TEST_CASE("train, enhance, inspect and evaluate") {
  TempDir dir("cli_flow");
  write_clean_images(dir.sub("clean"), 6);
  REQUIRE(run_cli("synthesize --clean-dir " + dir.sub("clean") + " --out-dir " +
                      dir.sub("data") + " --count 6 --seed 7 --beta 1.2,0.6,0.3 "
                      "--atmos 0.45,0.6,0.75",
                  dir.str())
              .exit_code == 0);

  // --epochs 0 emits the initialized checkpoint (pipeline smoke test)
  auto train0 = run_cli("train --input " + dir.sub("data/input") + " --reference " +
                            dir.sub("data/reference") + " --out " + dir.sub("run") +
                            " --resize 32 --base-channels 4 --batch-size 4 --epochs 0 "
                            "--seed 3 --quiet",
                        dir.str());
  REQUIRE(train0.exit_code == 0);
  REQUIRE(std::filesystem::exists(dir.sub("run/best.udhz")));
  json report = json::parse(train0.out);
  CHECK(report["steps_run"] == 0);

  SUBCASE("enhance with a zero-init checkpoint reproduces the physics inversion") {
    const std::string in_img = dir.sub("data/input/scene_0000.ppm");
    auto r = run_cli("enhance --checkpoint " + dir.sub("run/best.udhz") + " --input " +
                         in_img + " --out " + dir.sub("enh.ppm") +
                         " --dump-intermediates --quiet",
                     dir.str());
    REQUIRE(r.exit_code == 0);

    // J == J_raw for the zero-init refiner
    CHECK(file_bytes(dir.sub("enh.ppm")) == file_bytes(dir.sub("enh_jraw.ppm")));

    // dumped raw planes satisfy t = exp(-beta * D) exactly
    auto raw_d = file_bytes(dir.sub("enh_depth.raw"));
    auto raw_t = file_bytes(dir.sub("enh_t.raw"));
    REQUIRE(raw_d.size() == 32 * 32 * 8);
    REQUIRE(raw_t.size() == 3 * 32 * 32 * 8);
    json meta = file_json(dir.sub("enh_meta.json"));
    std::array<double, 3> beta{meta["beta"][0], meta["beta"][1], meta["beta"][2]};
    const double* depth = reinterpret_cast<const double*>(raw_d.data());
    const double* trans = reinterpret_cast<const double*>(raw_t.data());
    double max_err = 0.0;
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < 32 * 32; ++i) {
        max_err = std::max(max_err, std::fabs(trans[c * 32 * 32 + i] -
                                              std::exp(-beta[c] * depth[i])));
      }
    }
    CHECK(max_err < 1e-12);

    // byte-identical on a rerun
    auto again = run_cli("enhance --checkpoint " + dir.sub("run/best.udhz") +
                             " --input " + in_img + " --out " + dir.sub("enh2.ppm") +
                             " --quiet",
                         dir.str());
    REQUIRE(again.exit_code == 0);
    CHECK(file_bytes(dir.sub("enh.ppm")) == file_bytes(dir.sub("enh2.ppm")));

    // dimension violation without --resize
    save_image(procedural_image(9, 30, 30), dir.sub("odd.ppm"));
    CHECK(run_cli("enhance --checkpoint " + dir.sub("run/best.udhz") + " --input " +
                      dir.sub("odd.ppm") + " --out " + dir.sub("odd_out.ppm") + " --quiet",
                  dir.str())
              .exit_code == 2);
    CHECK(run_cli("enhance --checkpoint " + dir.sub("run/best.udhz") + " --input " +
                      dir.sub("odd.ppm") + " --out " + dir.sub("odd_out.ppm") +
                      " --resize --quiet",
                  dir.str())
              .exit_code == 0);
  }

  SUBCASE("inspect prints exactly the four prior vectors, matching the library") {
    const std::string img_path = dir.sub("data/input/scene_0001.ppm");
    auto r = run_cli("inspect --input " + img_path, dir.str());
    REQUIRE(r.exit_code == 0);
    json doc = json::parse(r.out);
    CHECK(doc.size() == 4);
    const AtmosphericLight al = fuse_classical(load_image(img_path), PriorConfig{});
    for (int c = 0; c < 3; ++c) {
      CHECK(doc["a_perc"][c].get<double>() == al.a_perc[c]);
      CHECK(doc["a_dcp"][c].get<double>() == al.a_dcp[c]);
      CHECK(doc["a_blur"][c].get<double>() == al.a_blur[c]);
      CHECK(doc["a_cl"][c].get<double>() == al.a_cl[c]);
    }
  }

  SUBCASE("evaluate reports SSIM 1.0 for an identity model on identical pairs") {
    // beta = 0 turns the physics inversion into the identity
    ModelParams identity = ModelParams::init(4, 1);
    identity.beta->data = {0.0, 0.0, 0.0};
    save_checkpoint(identity, dir.sub("identity.udhz"), "");
    auto r = run_cli("evaluate --checkpoint " + dir.sub("identity.udhz") + " --input " +
                         dir.sub("data/reference") + " --reference " +
                         dir.sub("data/reference") + " --resize 32",
                     dir.str());
    REQUIRE(r.exit_code == 0);
    json doc = json::parse(r.out);
    CHECK(doc["mean_ssim"].get<double>() == 1.0);
    CHECK(doc["mean_psnr"].get<std::string>() == "inf");
  }

  SUBCASE("ablate trains with the term dropped") {
    auto r = run_cli("ablate --input " + dir.sub("data/input") + " --reference " +
                         dir.sub("data/reference") + " --out " + dir.sub("run_ab") +
                         " --resize 32 --base-channels 4 --batch-size 4 --epochs 1 "
                         "--seed 3 --quiet --drop-term dct",
                     dir.str());
    REQUIRE(r.exit_code == 0);
    json doc = json::parse(r.out);
    const auto& e = doc["epochs"][0];
    const double expect = 1.5 * e["l1"].get<double>() + 0.5 * e["fwd"].get<double>() +
                          0.1 * e["a_reg"].get<double>() +
                          0.1 * e["beta_reg"].get<double>();
    CHECK(e["total"].get<double>() == doctest::Approx(expect).epsilon(1e-9));
  }
}
