#include "priors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace udehaze {

void PriorConfig::validate() const {
  const double sum = alpha[0] + alpha[1] + alpha[2];
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("PriorConfig: alpha weights must sum to 1");
  }
  if (!(top_fraction > 0.0 && top_fraction <= 1.0) ||
      !(dcp_top_fraction > 0.0 && dcp_top_fraction <= 1.0)) {
    throw std::invalid_argument("PriorConfig: top fractions must lie in (0, 1]");
  }
  if (dcp_window < 1 || dcp_window % 2 == 0) {
    throw std::invalid_argument("PriorConfig: dcp_window must be odd and >= 1");
  }
  if (patch_size < 1) {
    throw std::invalid_argument("PriorConfig: patch_size must be >= 1");
  }
}

namespace {

size_t top_k(double fraction, size_t n) {
  const size_t k = static_cast<size_t>(std::floor(fraction * static_cast<double>(n)));
  return std::max<size_t>(1, k);
}

}  // namespace

std::array<double, 3> estimate_percentile(const ImageRGB& img, const PriorConfig& cfg) {
  cfg.validate();
  const size_t n = img.pixel_count();
  if (n == 0) throw std::invalid_argument("estimate_percentile: empty image");
  const size_t k = top_k(cfg.top_fraction, n);

  std::array<double, 3> out{};
  std::vector<double> channel(n);
  for (int c = 0; c < 3; ++c) {
    for (size_t i = 0; i < n; ++i) channel[i] = img.values[i * 3 + c];
    std::sort(channel.begin(), channel.end(), std::greater<double>());
    double acc = 0.0;
    for (size_t i = 0; i < k; ++i) acc += channel[i];
    out[c] = acc / static_cast<double>(k);
  }
  return out;
}

std::array<double, 3> estimate_dcp(const ImageRGB& img, const PriorConfig& cfg) {
  cfg.validate();
  const int H = img.height, W = img.width;
  if (H < cfg.dcp_window || W < cfg.dcp_window) {
    throw std::invalid_argument("estimate_dcp: image " + std::to_string(H) + "x" +
                                std::to_string(W) + " smaller than the " +
                                std::to_string(cfg.dcp_window) + "x" +
                                std::to_string(cfg.dcp_window) + " window");
  }
  const int r = cfg.dcp_window / 2;

  // Per-pixel min over channels, then a replicate-border min filter. Row/column
  // passes are separable because min commutes.
  std::vector<double> dark(static_cast<size_t>(H) * W);
  for (size_t i = 0; i < dark.size(); ++i) {
    dark[i] = std::min({img.values[i * 3], img.values[i * 3 + 1], img.values[i * 3 + 2]});
  }
  std::vector<double> tmp(dark.size());
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double m = dark[static_cast<size_t>(y) * W + x];
      for (int dx = -r; dx <= r; ++dx) {
        const int xx = std::clamp(x + dx, 0, W - 1);
        m = std::min(m, dark[static_cast<size_t>(y) * W + xx]);
      }
      tmp[static_cast<size_t>(y) * W + x] = m;
    }
  }
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double m = tmp[static_cast<size_t>(y) * W + x];
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = std::clamp(y + dy, 0, H - 1);
        m = std::min(m, tmp[static_cast<size_t>(yy) * W + x]);
      }
      dark[static_cast<size_t>(y) * W + x] = m;
    }
  }

  const size_t n = dark.size();
  const size_t k = top_k(cfg.dcp_top_fraction, n);
  // Rank by dark-channel value, ties broken by row-major index (stable sort on
  // a descending key).
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&dark](size_t a, size_t b) { return dark[a] > dark[b]; });

  std::array<double, 3> out{};
  for (size_t i = 0; i < k; ++i) {
    const size_t p = idx[i];
    for (int c = 0; c < 3; ++c) out[c] += img.values[p * 3 + c];
  }
  for (int c = 0; c < 3; ++c) out[c] /= static_cast<double>(k);
  return out;
}

std::array<double, 3> estimate_blur(const ImageRGB& img, const PriorConfig& cfg) {
  cfg.validate();
  const int H = img.height, W = img.width, P = cfg.patch_size;
  if (H < P || W < P) {
    throw std::invalid_argument("estimate_blur: image " + std::to_string(H) + "x" +
                                std::to_string(W) + " smaller than the " +
                                std::to_string(P) + "x" + std::to_string(P) + " patch");
  }
  const int rows = H / P, cols = W / P;  // remainder cropped

  double best_var = 0.0;
  std::array<double, 3> best_mean{};
  bool first = true;
  for (int py = 0; py < rows; ++py) {
    for (int px = 0; px < cols; ++px) {
      std::array<double, 3> mean{};
      for (int y = py * P; y < (py + 1) * P; ++y)
        for (int x = px * P; x < (px + 1) * P; ++x)
          for (int c = 0; c < 3; ++c) mean[c] += img.at(y, x, c);
      const double inv = 1.0 / (static_cast<double>(P) * P);
      for (int c = 0; c < 3; ++c) mean[c] *= inv;

      double var = 0.0;
      for (int y = py * P; y < (py + 1) * P; ++y)
        for (int x = px * P; x < (px + 1) * P; ++x)
          for (int c = 0; c < 3; ++c) {
            const double d = img.at(y, x, c) - mean[c];
            var += d * d;
          }
      var *= inv;  // per-patch variance summed over the three channels

      // strict < keeps the smallest (row, col) patch on ties
      if (first || var < best_var) {
        first = false;
        best_var = var;
        best_mean = mean;
      }
    }
  }
  return best_mean;
}

AtmosphericLight fuse_classical(const ImageRGB& img, const PriorConfig& cfg) {
  AtmosphericLight al;
  al.a_perc = estimate_percentile(img, cfg);
  al.a_dcp = estimate_dcp(img, cfg);
  al.a_blur = estimate_blur(img, cfg);
  for (int c = 0; c < 3; ++c) {
    al.a_cl[c] = cfg.alpha[0] * al.a_perc[c] + cfg.alpha[1] * al.a_dcp[c] +
                 cfg.alpha[2] * al.a_blur[c];
  }
  return al;
}

}  // namespace udehaze
