#include "metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace udehaze {

namespace {

void check_shapes(const ImageRGB& a, const ImageRGB& b, const char* op) {
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument(std::string(op) + ": image size mismatch " +
                                std::to_string(a.height) + "x" + std::to_string(a.width) +
                                " vs " + std::to_string(b.height) + "x" +
                                std::to_string(b.width));
  }
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_window() {
  static const std::vector<double> win = [] {
    std::vector<double> w(kWindow * kWindow);
    const int r = kWindow / 2;
    double sum = 0.0;
    for (int y = -r; y <= r; ++y) {
      for (int x = -r; x <= r; ++x) {
        const double v = std::exp(-(x * x + y * y) / (2.0 * kSigma * kSigma));
        w[(y + r) * kWindow + (x + r)] = v;
        sum += v;
      }
    }
    for (double& v : w) v /= sum;
    return w;
  }();
  return win;
}

}  // namespace

double psnr(const ImageRGB& a, const ImageRGB& b) {
  check_shapes(a, b, "psnr");
  double acc = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.values.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageRGB& a, const ImageRGB& b) {
  check_shapes(a, b, "ssim");
  const int H = a.height, W = a.width;
  if (H < kWindow || W < kWindow) {
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  }
  const std::vector<double>& win = gaussian_window();
  const int r = kWindow / 2;

  double channel_acc = 0.0;
  for (int c = 0; c < 3; ++c) {
    double acc = 0.0;
    int64_t count = 0;
    for (int y = r; y < H - r; ++y) {
      for (int x = r; x < W - r; ++x) {
        double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const double wv = win[(dy + r) * kWindow + (dx + r)];
            const double va = a.at(y + dy, x + dx, c);
            const double vb = b.at(y + dy, x + dx, c);
            mu_a += wv * va;
            mu_b += wv * vb;
            aa += wv * va * va;
            bb += wv * vb * vb;
            ab += wv * va * vb;
          }
        }
        const double var_a = aa - mu_a * mu_a;
        const double var_b = bb - mu_b * mu_b;
        const double cov = ab - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
        const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
        acc += num / den;
        ++count;
      }
    }
    channel_acc += acc / static_cast<double>(count);
  }
  return channel_acc / 3.0;
}

void MetricsReport::add(const std::string& id, double psnr_db, double ssim_value) {
  ids.push_back(id);
  psnr_values.push_back(psnr_db);
  ssim_values.push_back(ssim_value);
}

void MetricsReport::finalize() {
  if (psnr_values.empty()) {
    mean_psnr = 0.0;
    mean_ssim = 0.0;
    return;
  }
  double p = 0.0, s = 0.0;
  for (double v : psnr_values) p += v;
  for (double v : ssim_values) s += v;
  mean_psnr = p / static_cast<double>(psnr_values.size());
  mean_ssim = s / static_cast<double>(ssim_values.size());
}

}  // namespace udehaze
