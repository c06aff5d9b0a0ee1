#include "enhance.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace udehaze {

namespace {

int nearest_valid(int v) {
  int r = ((v + 4) / 8) * 8;
  return std::max(r, 32);
}

void write_raw_f64(const std::string& path, const std::vector<double>& values) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write raw dump: " + path);
  for (double v : values) {
    const uint64_t bits = std::bit_cast<uint64_t>(v);
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
}

ImageRGB gray_image(const std::vector<double>& plane, int h, int w) {
  ImageRGB img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = plane[static_cast<size_t>(y) * w + x];
  return img;
}

std::string stem_of(const std::string& path) {
  const fs::path p(path);
  return (p.parent_path() / p.stem()).string();
}

std::string ext_of(const std::string& path) {
  std::string e = fs::path(path).extension().string();
  return (e == ".png" || e == ".ppm") ? e : ".ppm";
}

}  // namespace

std::string enhance_file(const ModelParams& params, const std::string& input_path,
                         const std::string& output_path, const EnhanceOptions& opts) {
  ImageRGB input = load_image(input_path);
  const int min_side = std::max(opts.prior.patch_size, opts.prior.dcp_window);
  const bool incompatible = input.height % 8 != 0 || input.width % 8 != 0 ||
                            input.height < min_side || input.width < min_side;
  if (incompatible) {
    if (!opts.auto_resize) {
      throw std::runtime_error(
          "enhance: input " + std::to_string(input.height) + "x" +
          std::to_string(input.width) + " must be divisible by 8 and at least " +
          std::to_string(min_side) + " pixels per side; pass --resize to adapt");
    }
    input = resize_bilinear(input, nearest_valid(input.height), nearest_valid(input.width));
  }

  ModelParams frozen = params.clone();
  frozen.set_requires_grad(false);
  const AtmosphericLight prior = fuse_classical(input, opts.prior);
  auto a_cl = Tensor::create({1, 3}, {prior.a_cl[0], prior.a_cl[1], prior.a_cl[2]});
  auto out = model_forward_batch(frozen, image_to_tensor(input), a_cl);

  save_image(tensor_to_image(*out.j), output_path);

  json meta{{"input", input_path},
            {"output", output_path},
            {"height", input.height},
            {"width", input.width},
            {"a", out.a->data},
            {"a_cl", {{"a_perc", prior.a_perc},
                      {"a_dcp", prior.a_dcp},
                      {"a_blur", prior.a_blur},
                      {"a_cl", prior.a_cl}}},
            {"beta", frozen.beta->data}};

  if (opts.dump_intermediates) {
    const std::string stem = stem_of(output_path);
    const std::string ext = ext_of(output_path);

    save_image(tensor_to_image(*out.j_raw), stem + "_jraw" + ext);
    save_image(tensor_to_image(*out.t), stem + "_t" + ext);

    // display depth: affine map [d_min, d_max] -> [0, 1]
    std::vector<double> display(out.depth->data.size());
    const double span = bounds::kDepthMax - bounds::kDepthMin;
    for (size_t i = 0; i < display.size(); ++i) {
      display[i] = (out.depth->data[i] - bounds::kDepthMin) / span;
    }
    save_image(gray_image(display, input.height, input.width), stem + "_depth" + ext);

    // quantization-free planes for downstream checks
    write_raw_f64(stem + "_depth.raw", out.depth->data);
    write_raw_f64(stem + "_t.raw", out.t->data);

    meta["intermediates"] = {{"j_raw", stem + "_jraw" + ext},
                             {"t", stem + "_t" + ext},
                             {"depth", stem + "_depth" + ext},
                             {"depth_raw", stem + "_depth.raw"},
                             {"t_raw", stem + "_t.raw"}};
    std::ofstream os(stem + "_meta.json", std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + stem + "_meta.json");
    os << meta.dump(2) << "\n";
  }
  return meta.dump(2);
}

std::string enhance_directory(const ModelParams& params, const std::string& input_dir,
                              const std::string& out_dir, const EnhanceOptions& opts) {
  if (!fs::is_directory(input_dir)) {
    throw std::runtime_error("enhance: not a directory: " + input_dir);
  }
  std::map<std::string, fs::path> files;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png" || ext == ".ppm") {
      files.emplace(entry.path().filename().string(), entry.path());
    }
  }
  if (files.empty()) {
    throw std::runtime_error("enhance: no .ppm/.png images in " + input_dir);
  }
  fs::create_directories(out_dir);

  std::vector<std::pair<std::string, fs::path>> ordered(files.begin(), files.end());
  std::vector<std::string> metas(ordered.size());
  parallel_for(static_cast<int64_t>(ordered.size()), [&](int64_t i) {
    const auto& [name, path] = ordered[static_cast<size_t>(i)];
    metas[static_cast<size_t>(i)] =
        enhance_file(params, path.string(), (fs::path(out_dir) / name).string(), opts);
  });

  json arr = json::array();
  for (const auto& m : metas) arr.push_back(json::parse(m));
  return arr.dump(2);
}

}  // namespace udehaze
