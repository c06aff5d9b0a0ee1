#pragma once

#include <array>

#include "image.hpp"

namespace udehaze {

// Configuration of the classical atmospheric-light estimators.
struct PriorConfig {
  std::array<double, 3> alpha{0.5, 0.3, 0.2};  // fusion weights, sum to 1
  double top_fraction = 0.001;                 // brightest-pixel share per channel
  int dcp_window = 15;                         // dark-channel min-filter window
  double dcp_top_fraction = 0.001;             // share of pixels ranked by dark channel
  int patch_size = 32;                         // low-variance patch side

  void validate() const;
};

// Per-channel atmospheric light with its classical decomposition:
// a_cl = alpha1*a_perc + alpha2*a_dcp + alpha3*a_blur.
struct AtmosphericLight {
  std::array<double, 3> a_perc{};
  std::array<double, 3> a_dcp{};
  std::array<double, 3> a_blur{};
  std::array<double, 3> a_cl{};
};

// Mean of the brightest top_fraction of pixels, per channel independently.
std::array<double, 3> estimate_percentile(const ImageRGB& img, const PriorConfig& cfg);

// Mean color over the pixels with the highest dark-channel response.
// Dark channel: min over channels of a min-filtered plane (replicate border).
std::array<double, 3> estimate_dcp(const ImageRGB& img, const PriorConfig& cfg);

// Mean color of the lowest-variance patch on a non-overlapping grid.
std::array<double, 3> estimate_blur(const ImageRGB& img, const PriorConfig& cfg);

AtmosphericLight fuse_classical(const ImageRGB& img, const PriorConfig& cfg);

}  // namespace udehaze
