#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "parallel.hpp"
#include "rng.hpp"

namespace fs = std::filesystem;

namespace udehaze {

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".ppm";
}

// stem -> filename, lexicographic byte order on stems
std::map<std::string, std::string> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir);
  }
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    auto [it, inserted] = out.emplace(stem, entry.path().filename().string());
    if (!inserted) {
      throw std::runtime_error("duplicate stem '" + stem + "' in " + dir + " (" +
                               it->second + " and " + entry.path().filename().string() +
                               ")");
    }
  }
  return out;
}

}  // namespace

std::vector<PairedSample> load_paired_dataset(const std::string& input_dir,
                                              const std::string& reference_dir,
                                              int resize_to) {
  const auto inputs = list_images(input_dir);
  const auto references = list_images(reference_dir);

  for (const auto& [stem, name] : inputs) {
    if (!references.count(stem)) {
      throw std::runtime_error("unmatched input file '" + name + "' (stem '" + stem +
                               "' missing from " + reference_dir + ")");
    }
  }
  for (const auto& [stem, name] : references) {
    if (!inputs.count(stem)) {
      throw std::runtime_error("unmatched reference file '" + name + "' (stem '" + stem +
                               "' missing from " + input_dir + ")");
    }
  }

  std::vector<PairedSample> samples(inputs.size());
  std::vector<std::pair<std::string, std::string>> entries(inputs.begin(), inputs.end());
  parallel_for(static_cast<int64_t>(entries.size()), [&](int64_t i) {
    const auto& [stem, name] = entries[static_cast<size_t>(i)];
    PairedSample s;
    s.id = stem;
    s.input = load_image((fs::path(input_dir) / name).string());
    s.reference = load_image((fs::path(reference_dir) / references.at(stem)).string());
    if (resize_to > 0) {
      s.input = resize_bilinear(s.input, resize_to, resize_to);
      s.reference = resize_bilinear(s.reference, resize_to, resize_to);
    } else if (s.input.height != s.reference.height ||
               s.input.width != s.reference.width) {
      throw std::runtime_error("pair '" + stem + "' has mismatched dimensions and no "
                               "resize was requested");
    }
    samples[static_cast<size_t>(i)] = std::move(s);
  });
  return samples;
}

SynthScene synthesize_scene(const ImageRGB& clean, uint64_t seed,
                            const SynthParams& params) {
  for (double v : clean.values) {
    if (v < 0.0 || v > 1.0) {
      throw std::invalid_argument("synthesize_scene: clean image values outside [0,1]");
    }
  }
  const int H = clean.height, W = clean.width;
  Rng rng(seed);

  // Smooth random field: K low-frequency cosine modes with 1/k amplitudes.
  struct Mode {
    double fx, fy, phase, amp;
  };
  std::vector<Mode> modes;
  for (int k = 1; k <= params.cosine_modes; ++k) {
    Mode m;
    m.fx = rng.uniform(0.5, 3.0);
    m.fy = rng.uniform(0.5, 3.0);
    m.phase = rng.uniform(0.0, 2.0 * M_PI);
    m.amp = 1.0 / static_cast<double>(k);
    modes.push_back(m);
  }

  std::vector<double> field(static_cast<size_t>(H) * W);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double v = 0.0;
      for (const Mode& m : modes) {
        v += m.amp * std::cos(2.0 * M_PI * (m.fx * x / W + m.fy * y / H) + m.phase);
      }
      field[static_cast<size_t>(y) * W + x] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  // Affine map into [depth_lo, depth_hi]; a flat field lands on the midpoint.
  const double span = hi - lo;
  for (double& v : field) {
    const double u = span > 0.0 ? (v - lo) / span : 0.5;
    v = params.depth_lo + (params.depth_hi - params.depth_lo) * u;
  }

  SynthScene scene;
  scene.clean = clean;
  scene.depth = std::move(field);
  scene.beta_true = params.beta_true;
  scene.a_true = params.a_true;
  scene.degraded = ImageRGB(H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double d = scene.depth[static_cast<size_t>(y) * W + x];
      for (int c = 0; c < 3; ++c) {
        const double t = std::exp(-params.beta_true[c] * d);
        const double v = clean.at(y, x, c) * t + params.a_true[c] * (1.0 - t);
        scene.degraded.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return scene;
}

SynthParams sample_synth_params(uint64_t seed, const SynthParams& base,
                                bool randomize_beta, bool randomize_atmos) {
  SynthParams p = base;
  Rng rng = Rng::derive(seed, 0x706172616dULL);
  if (randomize_beta) {
    std::array<double, 3> b{rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5),
                            rng.uniform(0.2, 1.5)};
    std::sort(b.begin(), b.end(), std::greater<double>());
    p.beta_true = b;
  }
  if (randomize_atmos) {
    std::array<double, 3> a{rng.uniform(0.4, 0.9), rng.uniform(0.4, 0.9),
                            rng.uniform(0.4, 0.9)};
    std::sort(a.begin(), a.end());
    p.a_true = a;
  }
  return p;
}

std::string write_synth_dataset(const SynthDatasetOptions& opts) {
  nlohmann::json truth = nlohmann::json::array();
  const fs::path out(opts.out_dir);
  fs::create_directories(out / "input");
  fs::create_directories(out / "reference");

  std::vector<std::string> clean_files;
  if (opts.count > 0) {
    for (const auto& [stem, name] : list_images(opts.clean_dir)) {
      clean_files.push_back(name);
    }
    if (clean_files.empty()) {
      throw std::runtime_error("no clean images (.ppm/.png) in " + opts.clean_dir);
    }
  }

  for (int i = 0; i < opts.count; ++i) {
    const std::string clean_name = clean_files[static_cast<size_t>(i) % clean_files.size()];
    ImageRGB clean = load_image((fs::path(opts.clean_dir) / clean_name).string());
    if (opts.resize_to > 0) clean = resize_bilinear(clean, opts.resize_to, opts.resize_to);
    // re-quantize so reference files reproduce the in-memory clean exactly
    for (double& v : clean.values) v = quantize8(std::clamp(v, 0.0, 1.0)) / 255.0;

    const uint64_t scene_seed = Rng::derive(opts.seed, static_cast<uint64_t>(i)).next_u64();
    SynthParams params = sample_synth_params(scene_seed, opts.params,
                                             !opts.fixed_beta, !opts.fixed_atmos);
    const SynthScene scene = synthesize_scene(clean, scene_seed, params);

    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d.ppm", i);
    save_image(scene.degraded, (out / "input" / name).string());
    save_image(scene.clean, (out / "reference" / name).string());

    double dmin = scene.depth[0], dmax = scene.depth[0], dsum = 0.0;
    for (double d : scene.depth) {
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
      dsum += d;
    }
    truth.push_back({{"id", std::string(name, std::strlen(name) - 4)},
                     {"source", clean_name},
                     {"beta", scene.beta_true},
                     {"atmospheric_light", scene.a_true},
                     {"depth", {{"min", dmin},
                                {"max", dmax},
                                {"mean", dsum / static_cast<double>(scene.depth.size())}}}});
  }

  nlohmann::json doc{{"count", opts.count}, {"seed", opts.seed}, {"scenes", truth}};
  const std::string text = doc.dump(2);
  std::ofstream os(out / "truth.json", std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write truth.json in " + opts.out_dir);
  os << text << "\n";
  return text;
}

}  // namespace udehaze
