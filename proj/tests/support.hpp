#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "image.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace testsupport {

inline udehaze::TensorPtr rand_tensor(udehaze::Rng& rng, std::vector<int64_t> shape,
                                      double lo, double hi, bool requires_grad = true) {
  auto t = udehaze::Tensor::create(std::move(shape), requires_grad);
  for (double& v : t->data) v = rng.uniform(lo, hi);
  return t;
}

// Central finite-difference gradient check. build() must construct a fresh
// graph from the current leaf data; the analytic gradients of one backward
// pass are compared against (f(x+h) - f(x-h)) / 2h with h = 1e-4*max(1,|x|).
// Returns the worst error |fd - analytic| / max(1, |fd|, |analytic|).
inline double gradcheck(const std::function<udehaze::TensorPtr()>& build,
                        const std::vector<udehaze::TensorPtr>& leaves) {
  auto loss = build();
  udehaze::backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& leaf : leaves) {
    leaf->ensure_grad();
    analytic.push_back(leaf->grad);
  }

  double worst = 0.0;
  for (size_t l = 0; l < leaves.size(); ++l) {
    auto& leaf = *leaves[l];
    for (size_t i = 0; i < leaf.data.size(); ++i) {
      const double x0 = leaf.data[i];
      const double h = 1e-4 * std::max(1.0, std::fabs(x0));
      leaf.data[i] = x0 + h;
      const double fp = build()->item();
      leaf.data[i] = x0 - h;
      const double fm = build()->item();
      leaf.data[i] = x0;
      const double fd = (fp - fm) / (2.0 * h);
      const double g = analytic[l][i];
      const double err = std::fabs(fd - g) / std::max({1.0, std::fabs(fd), std::fabs(g)});
      worst = std::max(worst, err);
    }
  }
  for (auto& leaf : leaves) leaf->zero_grad();
  return worst;
}

// Deterministic synthetic "clean" image: smooth color gradients plus a few
// solid rectangles and disks so there is energy at all frequencies.
inline udehaze::ImageRGB procedural_image(uint64_t seed, int h, int w) {
  udehaze::Rng rng = udehaze::Rng::derive(seed, 0x636c65616eULL);
  udehaze::ImageRGB img(h, w);
  const double base[3] = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                          rng.uniform(0.2, 0.8)};
  const double gx[3] = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                        rng.uniform(-0.3, 0.3)};
  const double gy[3] = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                        rng.uniform(-0.3, 0.3)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = base[c] + gx[c] * (static_cast<double>(x) / w - 0.5) +
                   gy[c] * (static_cast<double>(y) / h - 0.5);
        img.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  const int shapes = 4 + static_cast<int>(rng.uniform_int(4));
  for (int s = 0; s < shapes; ++s) {
    const double color[3] = {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95),
                             rng.uniform(0.05, 0.95)};
    const int cx = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(w)));
    const int cy = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(h)));
    const int r = 2 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(
                          std::max(2, std::min(h, w) / 4))));
    const bool disk = rng.uniform() < 0.5;
    for (int y = std::max(0, cy - r); y < std::min(h, cy + r); ++y) {
      for (int x = std::max(0, cx - r); x < std::min(w, cx + r); ++x) {
        if (disk && (x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
      }
    }
  }
  return img;
}

// Clean-scene generator with underwater radiance statistics: red is the
// dimmest channel, blue the brightest, plus solid shapes for edge content.
// Matches the physical assumptions behind the atmospheric-light priors.
inline udehaze::ImageRGB procedural_underwater_radiance(uint64_t seed, int h, int w) {
  udehaze::Rng rng = udehaze::Rng::derive(seed, 0x756e646572ULL);
  udehaze::ImageRGB img(h, w);
  const double fx[3] = {rng.uniform(4.0, 14.0), rng.uniform(4.0, 14.0),
                        rng.uniform(4.0, 14.0)};
  const double ph[3] = {rng.uniform(0.0, 6.28), rng.uniform(0.0, 6.28),
                        rng.uniform(0.0, 6.28)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = 0.18 + 0.15 * std::cos(x / fx[0] + ph[0]) +
                       0.08 * std::sin(y / fx[1]);
      const double g = 0.40 + 0.28 * std::sin(y / fx[1] + ph[1]) +
                       0.10 * std::cos(x / fx[0]);
      const double b = 0.50 + 0.30 * std::cos((x + y) / fx[2] + ph[2]);
      img.at(y, x, 0) = std::clamp(r, 0.0, 1.0);
      img.at(y, x, 1) = std::clamp(g, 0.0, 1.0);
      img.at(y, x, 2) = std::clamp(b, 0.0, 1.0);
    }
  }
  const int shapes = 3 + static_cast<int>(rng.uniform_int(3));
  for (int s = 0; s < shapes; ++s) {
    const double color[3] = {rng.uniform(0.0, 0.40), rng.uniform(0.1, 0.8),
                             rng.uniform(0.15, 0.9)};
    const int cx = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(w)));
    const int cy = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(h)));
    const int r = 3 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(
                          std::max(2, std::min(h, w) / 4))));
    for (int y = std::max(0, cy - r); y < std::min(h, cy + r); ++y) {
      for (int x = std::max(0, cx - r); x < std::min(w, cx + r); ++x) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
      }
    }
  }
  return img;
}

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    udehaze::Rng rng(std::random_device{}());
    path = std::filesystem::temp_directory_path() /
           ("udehaze_" + tag + "_" + std::to_string(rng.next_u64()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testsupport
