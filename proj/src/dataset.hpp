#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"

namespace udehaze {

struct PairedSample {
  std::string id;  // shared filename stem
  ImageRGB input;
  ImageRGB reference;
};

// Loads matching files from input_dir and reference_dir (PPM/PNG, matched by
// filename stem, lexicographic byte order). resize_to > 0 resizes every image
// to resize_to x resize_to; 0 keeps original sizes (pairs must then match).
// A stem present on only one side is an error naming the orphan.
std::vector<PairedSample> load_paired_dataset(const std::string& input_dir,
                                              const std::string& reference_dir,
                                              int resize_to = 128);

struct SynthParams {
  std::array<double, 3> beta_true{1.2, 0.6, 0.3};  // must satisfy R >= G >= B
  std::array<double, 3> a_true{0.45, 0.60, 0.75};  // within [0.3, 1.0]
  double depth_lo = 0.5;  // affine range of the random depth field
  double depth_hi = 8.0;
  int cosine_modes = 4;
};

// Clean scene degraded by the forward model with a smooth seeded depth field
// (sum of low-frequency cosines with 1/k amplitudes, affinely mapped into
// [depth_lo, depth_hi]).
struct SynthScene {
  ImageRGB clean;
  std::vector<double> depth;  // height x width, row-major
  std::array<double, 3> beta_true;
  std::array<double, 3> a_true;
  ImageRGB degraded;
};

SynthScene synthesize_scene(const ImageRGB& clean, uint64_t seed,
                            const SynthParams& params);

// Draws per-scene beta/A when the caller fixes neither: beta uniform in
// [0.2, 1.5] sorted descending, A uniform in [0.4, 0.9] sorted ascending.
SynthParams sample_synth_params(uint64_t seed, const SynthParams& base,
                                bool randomize_beta, bool randomize_atmos);

struct SynthDatasetOptions {
  std::string clean_dir;
  std::string out_dir;
  int count = 0;
  uint64_t seed = 0;
  int resize_to = 0;  // 0 keeps the clean image size
  bool fixed_beta = false;
  bool fixed_atmos = false;
  SynthParams params;
};

// Writes <out>/input/*.ppm, <out>/reference/*.ppm and <out>/truth.json.
// Clean images cycle when count exceeds the directory size; each scene uses
// an independent seed stream so the dataset is reproducible bit-for-bit.
// Returns the truth.json content.
std::string write_synth_dataset(const SynthDatasetOptions& opts);

}  // namespace udehaze
