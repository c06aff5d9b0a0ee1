#pragma once

#include <string>
#include <vector>

#include "image.hpp"

namespace udehaze {

// Peak signal-to-noise ratio in dB over all channels and pixels, peak 1.0.
// Identical images give +infinity.
double psnr(const ImageRGB& a, const ImageRGB& b);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// dynamic range 1.0. Computed per channel over valid (non-padded) window
// positions, then averaged over channels.
double ssim(const ImageRGB& a, const ImageRGB& b);

struct MetricsReport {
  std::vector<std::string> ids;
  std::vector<double> psnr_values;
  std::vector<double> ssim_values;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  void add(const std::string& id, double psnr_db, double ssim_value);
  void finalize();  // fills the means
};

}  // namespace udehaze
