#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace udehaze {

// RGB image with values in [0, 1], interleaved row-major storage
// (v[(y*width + x)*3 + c]). 8-bit files convert as v = byte / 255.
struct ImageRGB {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // height * width * 3

  ImageRGB() = default;
  ImageRGB(int h, int w, double fill = 0.0);

  double& at(int y, int x, int c) { return values[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return values[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }
};

// Supported formats: binary PPM (P6, maxval 255) and 8-bit PNG.
// The format is picked by file extension on save and by magic bytes on load.
ImageRGB load_image(const std::string& path);
void save_image(const ImageRGB& img, const std::string& path);

ImageRGB decode_ppm(const std::vector<uint8_t>& bytes, const std::string& origin);
std::vector<uint8_t> encode_ppm(const ImageRGB& img);

// Round-half-up quantization used by every encoder.
uint8_t quantize8(double v);

// Bilinear resize, align-corners = false; identity when sizes match.
ImageRGB resize_bilinear(const ImageRGB& img, int out_h, int out_w);

// Layout conversions between interleaved images and planar CHW tensors.
TensorPtr image_to_tensor(const ImageRGB& img);              // 1x3xHxW
ImageRGB tensor_to_image(const Tensor& t, int batch_index = 0);  // from Nx3xHxW

// Stack images into one Nx3xHxW batch tensor (all images same size).
TensorPtr images_to_batch(const std::vector<const ImageRGB*>& imgs);

}  // namespace udehaze
