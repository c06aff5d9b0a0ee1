#pragma once

// Independent reference implementations used by the unit and acceptance
// suites. These deliberately avoid the library's own computation paths.

#include <cmath>
#include <vector>

#include "losses.hpp"
#include "tensor.hpp"

namespace oracles {

// Direct O(N^4) orthonormal DCT-II of one patch (plain cosine sums, no
// basis-matrix product).
inline std::vector<double> dct2_direct(const std::vector<double>& p, int n) {
  std::vector<double> out(p.size(), 0.0);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      double acc = 0.0;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          acc += p[static_cast<size_t>(y) * n + x] *
                 std::cos(M_PI * (2.0 * y + 1.0) * u / (2.0 * n)) *
                 std::cos(M_PI * (2.0 * x + 1.0) * v / (2.0 * n));
      const double cu = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      const double cv = v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      out[static_cast<size_t>(u) * n + v] = cu * cv * acc;
    }
  }
  return out;
}

// Brute-force multi-scale DCT loss: per scale, the mean over patches,
// channels and batch of the per-patch L1 coefficient distance, then the
// weighted sum over scales.
inline double dct_loss_brute_force(const udehaze::Tensor& j, const udehaze::Tensor& jgt,
                                   const udehaze::LossConfig& cfg) {
  const int64_t N = j.shape[0], C = j.shape[1], H = j.shape[2], W = j.shape[3];
  double total = 0.0;
  for (size_t s = 0; s < cfg.dct_patch_sizes.size(); ++s) {
    const int n = cfg.dct_patch_sizes[s];
    double scale_acc = 0.0;
    int64_t patches = 0;
    for (int64_t b = 0; b < N; ++b) {
      for (int64_t c = 0; c < C; ++c) {
        const double* pj = &j.data[(b * C + c) * H * W];
        const double* pg = &jgt.data[(b * C + c) * H * W];
        for (int64_t ty = 0; ty + n <= H; ty += n) {
          for (int64_t tx = 0; tx + n <= W; tx += n) {
            std::vector<double> patch_j(static_cast<size_t>(n) * n);
            std::vector<double> patch_g(static_cast<size_t>(n) * n);
            for (int y = 0; y < n; ++y)
              for (int x = 0; x < n; ++x) {
                patch_j[static_cast<size_t>(y) * n + x] = pj[(ty + y) * W + tx + x];
                patch_g[static_cast<size_t>(y) * n + x] = pg[(ty + y) * W + tx + x];
              }
            auto cj = dct2_direct(patch_j, n);
            auto cg = dct2_direct(patch_g, n);
            double l1 = 0.0;
            for (size_t i = 0; i < cj.size(); ++i) l1 += std::fabs(cj[i] - cg[i]);
            scale_acc += l1;
            ++patches;
          }
        }
      }
    }
    total += cfg.dct_weights[s] * scale_acc / static_cast<double>(patches);
  }
  return total;
}

}  // namespace oracles
