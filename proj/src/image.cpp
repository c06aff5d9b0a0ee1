#include "image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace udehaze {

ImageRGB::ImageRGB(int h, int w, double fill) : height(h), width(w) {
  if (h < 1 || w < 1) {
    throw std::invalid_argument("ImageRGB: dimensions must be >= 1, got " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
  values.assign(static_cast<size_t>(h) * w * 3, fill);
}

uint8_t quantize8(double v) {
  double q = std::floor(v * 255.0 + 0.5);
  if (q < 0.0) q = 0.0;
  if (q > 255.0) q = 255.0;
  return static_cast<uint8_t>(q);
}

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Netpbm token scanner: skips whitespace and '#' comments.
struct PpmScanner {
  const std::vector<uint8_t>& b;
  size_t pos = 0;
  const std::string& origin;

  int next_int() {
    while (pos < b.size()) {
      const char c = static_cast<char>(b[pos]);
      if (c == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= b.size() || b[pos] < '0' || b[pos] > '9') {
      throw std::runtime_error("malformed PPM header in " + origin);
    }
    long v = 0;
    while (pos < b.size() && b[pos] >= '0' && b[pos] <= '9') {
      v = v * 10 + (b[pos] - '0');
      if (v > 1 << 28) throw std::runtime_error("absurd PPM header value in " + origin);
      ++pos;
    }
    return static_cast<int>(v);
  }
};

bool has_suffix(const std::string& s, const std::string& suf) {
  if (s.size() < suf.size()) return false;
  for (size_t i = 0; i < suf.size(); ++i) {
    char a = s[s.size() - suf.size() + i];
    if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
    if (a != suf[i]) return false;
  }
  return true;
}

ImageRGB decode_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error("PNG read failed for " + path + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error("PNG decode failed for " + path + ": " + msg);
  }
  ImageRGB img(static_cast<int>(image.height), static_cast<int>(image.width));
  const size_t n = img.values.size();
  for (size_t i = 0; i < n; ++i) img.values[i] = buf[i] / 255.0;
  return img;
}

void encode_png(const ImageRGB& img, const std::string& path) {
  std::vector<uint8_t> buf(img.values.size());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = quantize8(img.values[i]);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw std::runtime_error("PNG write failed for " + path + ": " + image.message);
  }
}

}  // namespace

ImageRGB decode_ppm(const std::vector<uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw std::runtime_error("not a P6 PPM file: " + origin);
  }
  PpmScanner sc{bytes, 2, origin};
  const int w = sc.next_int();
  const int h = sc.next_int();
  const int maxval = sc.next_int();
  if (w < 1 || h < 1) throw std::runtime_error("invalid PPM dimensions in " + origin);
  if (maxval != 255) {
    throw std::runtime_error("unsupported PPM maxval " + std::to_string(maxval) +
                             " in " + origin + " (only 8-bit supported)");
  }
  // exactly one whitespace byte separates the header from the raster
  if (sc.pos >= bytes.size()) throw std::runtime_error("truncated PPM: " + origin);
  ++sc.pos;
  const size_t need = static_cast<size_t>(w) * h * 3;
  if (bytes.size() - sc.pos < need) {
    throw std::runtime_error("truncated PPM raster in " + origin + " (need " +
                             std::to_string(need) + " bytes, have " +
                             std::to_string(bytes.size() - sc.pos) + ")");
  }
  ImageRGB img(h, w);
  for (size_t i = 0; i < need; ++i) img.values[i] = bytes[sc.pos + i] / 255.0;
  return img;
}

std::vector<uint8_t> encode_ppm(const ImageRGB& img) {
  std::string header = "P6\n" + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.values.size());
  for (double v : img.values) out.push_back(quantize8(v));
  return out;
}

ImageRGB load_image(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    return decode_ppm(bytes, path);
  }
  static const uint8_t png_magic[4] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), png_magic, 4) == 0) {
    return decode_png(path);
  }
  throw std::runtime_error("unsupported image format (expected P6 PPM or PNG): " + path);
}

void save_image(const ImageRGB& img, const std::string& path) {
  if (has_suffix(path, ".png")) {
    encode_png(img, path);
  } else if (has_suffix(path, ".ppm")) {
    write_file(path, encode_ppm(img));
  } else {
    throw std::runtime_error("unsupported output extension (use .ppm or .png): " + path);
  }
}

ImageRGB resize_bilinear(const ImageRGB& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("resize_bilinear: target dimensions must be >= 1");
  }
  if (out_h == img.height && out_w == img.width) return img;

  auto taps = [](int out_len, int in_len, std::vector<int>& i0, std::vector<int>& i1,
                 std::vector<double>& w1) {
    i0.resize(out_len);
    i1.resize(out_len);
    w1.resize(out_len);
    const double scale = static_cast<double>(in_len) / out_len;
    for (int o = 0; o < out_len; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      if (src < 0.0) src = 0.0;
      if (src > in_len - 1) src = in_len - 1;
      const int lo = static_cast<int>(src);
      i0[o] = lo;
      i1[o] = std::min(lo + 1, in_len - 1);
      w1[o] = src - lo;
    }
  };
  std::vector<int> y0, y1, x0, x1;
  std::vector<double> wy, wx;
  taps(out_h, img.height, y0, y1, wy);
  taps(out_w, img.width, x0, x1, wx);

  ImageRGB out(out_h, out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = wy[oy];
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = wx[ox];
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(y0[oy], x0[ox], c) * (1.0 - fx) +
                           img.at(y0[oy], x1[ox], c) * fx;
        const double bot = img.at(y1[oy], x0[ox], c) * (1.0 - fx) +
                           img.at(y1[oy], x1[ox], c) * fx;
        out.at(oy, ox, c) = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return out;
}

TensorPtr image_to_tensor(const ImageRGB& img) {
  const int64_t H = img.height, W = img.width;
  std::vector<double> data(static_cast<size_t>(3 * H * W));
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W; ++x)
        data[(c * H + y) * W + x] = img.values[(y * W + x) * 3 + c];
  return Tensor::create({1, 3, H, W}, std::move(data));
}

ImageRGB tensor_to_image(const Tensor& t, int batch_index) {
  if (t.shape.size() != 4 || t.shape[1] != 3) {
    throw std::invalid_argument("tensor_to_image: expected Nx3xHxW, got " +
                                shape_str(t.shape));
  }
  if (batch_index < 0 || batch_index >= t.shape[0]) {
    throw std::invalid_argument("tensor_to_image: batch index out of range");
  }
  const int64_t H = t.shape[2], W = t.shape[3];
  ImageRGB img(static_cast<int>(H), static_cast<int>(W));
  const double* base = &t.data[static_cast<size_t>(batch_index) * 3 * H * W];
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W; ++x)
        img.values[(y * W + x) * 3 + c] = base[(c * H + y) * W + x];
  return img;
}

TensorPtr images_to_batch(const std::vector<const ImageRGB*>& imgs) {
  if (imgs.empty()) throw std::invalid_argument("images_to_batch: empty batch");
  const int64_t H = imgs[0]->height, W = imgs[0]->width;
  const int64_t N = static_cast<int64_t>(imgs.size());
  std::vector<double> data(static_cast<size_t>(N * 3 * H * W));
  for (int64_t n = 0; n < N; ++n) {
    const ImageRGB& im = *imgs[n];
    if (im.height != H || im.width != W) {
      throw std::invalid_argument("images_to_batch: mixed image sizes");
    }
    double* base = &data[static_cast<size_t>(n) * 3 * H * W];
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
          base[(c * H + y) * W + x] = im.values[(y * W + x) * 3 + c];
  }
  return Tensor::create({N, 3, H, W}, std::move(data));
}

}  // namespace udehaze
