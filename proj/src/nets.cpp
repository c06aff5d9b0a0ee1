#include "nets.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rng.hpp"

namespace udehaze {

namespace {

ConvLayer make_conv(Rng& rng, int in_ch, int out_ch, int kernel, int stride,
                    int padding, int dilation, bool zero_init = false) {
  ConvLayer layer;
  const int64_t fan_in = static_cast<int64_t>(in_ch) * kernel * kernel;
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> w(static_cast<size_t>(out_ch) * in_ch * kernel * kernel);
  for (double& v : w) v = zero_init ? 0.0 : rng.uniform(-limit, limit);
  layer.w = Tensor::create({out_ch, in_ch, kernel, kernel}, std::move(w), true);
  layer.b = Tensor::create({out_ch}, std::vector<double>(out_ch, 0.0), true);
  layer.stride = stride;
  layer.padding = padding;
  layer.dilation = dilation;
  return layer;
}

TensorPtr run_conv(const ConvLayer& l, const TensorPtr& x) {
  return conv2d(x, l.w, l.b, l.stride, l.padding, l.dilation);
}

void collect(const ConvLayer& l, const std::string& name,
             std::vector<TensorPtr>* params, std::vector<std::string>* names) {
  if (params) {
    params->push_back(l.w);
    params->push_back(l.b);
  }
  if (names) {
    names->push_back(name + ".weight");
    names->push_back(name + ".bias");
  }
}

template <class Fn>
void for_each_layer(const ModelParams& p, Fn&& fn) {
  fn(p.depth.enc1, "depthnet.enc1");
  fn(p.depth.enc2, "depthnet.enc2");
  fn(p.depth.enc3, "depthnet.enc3");
  fn(p.depth.bot1, "depthnet.bot1");
  fn(p.depth.bot2, "depthnet.bot2");
  fn(p.depth.bot3, "depthnet.bot3");
  fn(p.depth.dec3a, "depthnet.dec3a");
  fn(p.depth.dec3b, "depthnet.dec3b");
  fn(p.depth.dec2a, "depthnet.dec2a");
  fn(p.depth.dec2b, "depthnet.dec2b");
  fn(p.depth.dec1a, "depthnet.dec1a");
  fn(p.depth.dec1b, "depthnet.dec1b");
  fn(p.depth.head, "depthnet.head");
  fn(p.anet.c1, "anet.c1");
  fn(p.anet.c2, "anet.c2");
  fn(p.anet.c3, "anet.c3");
  fn(p.anet.head, "anet.head");
  fn(p.refiner.r1, "refiner.r1");
  fn(p.refiner.r2, "refiner.r2");
  fn(p.refiner.r3, "refiner.r3");
}

void check_divisible(const TensorPtr& image) {
  if (image->shape.size() != 4 || image->shape[1] != 3) {
    throw std::invalid_argument("model: expected Nx3xHxW input, got " +
                                shape_str(image->shape));
  }
  const int64_t H = image->shape[2], W = image->shape[3];
  if (H % 8 != 0 || W % 8 != 0) {
    throw std::invalid_argument(
        "model: input height and width must be divisible by 8 (three stride-2 "
        "encoder stages), got " +
        std::to_string(H) + "x" + std::to_string(W));
  }
}

}  // namespace

ModelParams ModelParams::init(int base_channels, uint64_t seed) {
  if (base_channels < 1) {
    throw std::invalid_argument("ModelParams: base_channels must be >= 1");
  }
  Rng rng = Rng::derive(seed, 0x6d6f64656cULL);  // independent init stream
  ModelParams p;
  p.config.base_channels = base_channels;
  const int c1 = base_channels, c2 = 2 * base_channels, c4 = 4 * base_channels;

  p.depth.enc1 = make_conv(rng, 3, c1, 3, 2, 1, 1);
  p.depth.enc2 = make_conv(rng, c1, c2, 3, 2, 1, 1);
  p.depth.enc3 = make_conv(rng, c2, c4, 3, 2, 1, 1);
  const auto dil = ModelConfig::kBottleneckDilations;
  p.depth.bot1 = make_conv(rng, c4, c4, 3, 1, dil[0], dil[0]);
  p.depth.bot2 = make_conv(rng, c4, c4, 3, 1, dil[1], dil[1]);
  p.depth.bot3 = make_conv(rng, c4, c4, 3, 1, dil[2], dil[2]);
  p.depth.dec3a = make_conv(rng, c4 + c2, c2, 3, 1, 1, 1);
  p.depth.dec3b = make_conv(rng, c2, c2, 3, 1, 1, 1);
  p.depth.dec2a = make_conv(rng, c2 + c1, c1, 3, 1, 1, 1);
  p.depth.dec2b = make_conv(rng, c1, c1, 3, 1, 1, 1);
  p.depth.dec1a = make_conv(rng, c1, c1, 3, 1, 1, 1);
  p.depth.dec1b = make_conv(rng, c1, c1, 3, 1, 1, 1);
  // Heads start at the physics-neutral point so the inversion begins close to
  // the identity and no pixel is born inside a clamp/floor dead zone: depth
  // comes up as a shallow constant (sigmoid(-2.5) maps to ~0.85) and the
  // atmospheric light starts exactly at the classical prior.
  p.depth.head = make_conv(rng, c1, 1, 3, 1, 1, 1, /*zero_init=*/true);
  std::fill(p.depth.head.b->data.begin(), p.depth.head.b->data.end(), -2.5);

  p.anet.c1 = make_conv(rng, 3, c1, 3, 2, 1, 1);
  p.anet.c2 = make_conv(rng, c1, c2, 3, 2, 1, 1);
  p.anet.c3 = make_conv(rng, c2, c4, 3, 2, 1, 1);
  p.anet.head = make_conv(rng, c4, 3, 1, 1, 0, 1, /*zero_init=*/true);

  const int rh = ModelConfig::kRefinerHidden;
  p.refiner.r1 = make_conv(rng, 3, rh, 3, 1, 1, 1);
  p.refiner.r2 = make_conv(rng, rh, rh, 3, 1, 1, 1);
  p.refiner.r3 = make_conv(rng, rh, 3, 3, 1, 1, 1, /*zero_init=*/true);

  p.beta = Tensor::create({3}, {0.8, 0.4, 0.2}, true);
  return p;
}

std::vector<TensorPtr> ModelParams::parameters() const {
  std::vector<TensorPtr> params;
  for_each_layer(*this, [&](const ConvLayer& l, const char*) {
    collect(l, "", &params, nullptr);
  });
  params.push_back(beta);
  return params;
}

std::vector<std::string> ModelParams::parameter_names() const {
  std::vector<std::string> names;
  for_each_layer(*this, [&](const ConvLayer& l, const char* name) {
    collect(l, name, nullptr, &names);
  });
  names.emplace_back("beta");
  return names;
}

int64_t ModelParams::parameter_count() const {
  int64_t n = 0;
  for (const auto& p : parameters()) n += p->numel();
  return n;
}

void ModelParams::set_requires_grad(bool enabled) {
  for (const auto& p : parameters()) p->requires_grad = enabled;
}

ModelParams ModelParams::clone() const {
  ModelParams copy = *this;
  auto dup = [](ConvLayer& l) {
    l.w = Tensor::create(l.w->shape, l.w->data, l.w->requires_grad);
    l.b = Tensor::create(l.b->shape, l.b->data, l.b->requires_grad);
  };
  for (ConvLayer* l : {&copy.depth.enc1, &copy.depth.enc2, &copy.depth.enc3,
                       &copy.depth.bot1, &copy.depth.bot2, &copy.depth.bot3,
                       &copy.depth.dec3a, &copy.depth.dec3b, &copy.depth.dec2a,
                       &copy.depth.dec2b, &copy.depth.dec1a, &copy.depth.dec1b,
                       &copy.depth.head, &copy.anet.c1, &copy.anet.c2, &copy.anet.c3,
                       &copy.anet.head, &copy.refiner.r1, &copy.refiner.r2,
                       &copy.refiner.r3}) {
    dup(*l);
  }
  copy.beta = Tensor::create(beta->shape, beta->data, beta->requires_grad);
  return copy;
}

TensorPtr depthnet_forward(const ModelParams& params, const TensorPtr& image) {
  check_divisible(image);
  const DepthNet& net = params.depth;
  auto e1 = relu(run_conv(net.enc1, image));
  auto e2 = relu(run_conv(net.enc2, e1));
  auto e3 = relu(run_conv(net.enc3, e2));
  auto b = relu(run_conv(net.bot1, e3));
  b = relu(run_conv(net.bot2, b));
  b = relu(run_conv(net.bot3, b));
  auto d3 = relu(run_conv(net.dec3a, concat_channels(bilinear_upsample2x(b), e2)));
  d3 = relu(run_conv(net.dec3b, d3));
  auto d2 = relu(run_conv(net.dec2a, concat_channels(bilinear_upsample2x(d3), e1)));
  d2 = relu(run_conv(net.dec2b, d2));
  auto d1 = relu(run_conv(net.dec1a, bilinear_upsample2x(d2)));
  d1 = relu(run_conv(net.dec1b, d1));
  auto z = run_conv(net.head, d1);
  const double span = bounds::kDepthMax - bounds::kDepthMin;
  return add_scalar(mul_scalar(sigmoid(z), span), bounds::kDepthMin);
}

TensorPtr anet_forward(const ModelParams& params, const TensorPtr& image,
                       const TensorPtr& a_cl) {
  if (a_cl->shape.size() != 2 || a_cl->shape[0] != image->shape[0] ||
      a_cl->shape[1] != 3) {
    throw std::invalid_argument("anet_forward: a_cl must be (N,3), got " +
                                shape_str(a_cl->shape));
  }
  const ANet& net = params.anet;
  auto x = relu(run_conv(net.c1, image));
  x = relu(run_conv(net.c2, x));
  x = relu(run_conv(net.c3, x));
  x = run_conv(net.head, x);
  auto pooled = mean_axis(mean_axis(x, 3), 2);  // (N,3)
  auto delta = tanh(pooled);
  return clamp(add(a_cl, mul_scalar(delta, ModelConfig::kGamma)),
               bounds::kAtmosMin, bounds::kAtmosMax);
}

TensorPtr refiner_forward(const ModelParams& params, const TensorPtr& j_raw) {
  const RefinerNet& net = params.refiner;
  auto h = relu(run_conv(net.r1, j_raw));
  h = relu(run_conv(net.r2, h));
  auto correction = tanh(run_conv(net.r3, h));
  return clamp(add(j_raw, correction), 0.0, 1.0);
}

ModelOutputs model_forward_batch(const ModelParams& params, const TensorPtr& image,
                                 const TensorPtr& a_cl) {
  check_divisible(image);
  ModelOutputs out;
  out.a_cl = a_cl;
  out.depth = depthnet_forward(params, image);
  out.t = transmission(out.depth, params.beta);
  out.a = anet_forward(params, image, a_cl);
  out.j_raw = invert(image, out.t, out.a);
  out.j = refiner_forward(params, out.j_raw);
  return out;
}

TensorPtr classical_light_batch(const std::vector<const ImageRGB*>& imgs,
                                const PriorConfig& cfg) {
  std::vector<double> data;
  data.reserve(imgs.size() * 3);
  for (const ImageRGB* img : imgs) {
    const AtmosphericLight al = fuse_classical(*img, cfg);
    data.insert(data.end(), al.a_cl.begin(), al.a_cl.end());
  }
  return Tensor::create({static_cast<int64_t>(imgs.size()), 3}, std::move(data));
}

ModelOutputs model_forward(const ModelParams& params, const ImageRGB& image,
                           const PriorConfig& prior_cfg) {
  auto input = image_to_tensor(image);
  auto a_cl = classical_light_batch({&image}, prior_cfg);
  return model_forward_batch(params, input, a_cl);
}

// ---- checkpoint I/O ----

namespace {

constexpr char kMagic[5] = {'U', 'D', 'H', 'Z', '1'};

void put_u32(std::ostream& os, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  put_u32(os, static_cast<uint32_t>(v));
  put_u32(os, static_cast<uint32_t>(v >> 32));
}

void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<uint64_t>(d)); }

uint32_t get_u32(std::istream& is) {
  uint8_t b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& is) {
  const uint64_t lo = get_u32(is);
  const uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

std::string checkpoint_sidecar_path(const std::string& path) { return path + ".json"; }

void save_checkpoint(const ModelParams& params, const std::string& path,
                     const std::string& sidecar_json) {
  // write-temp-then-rename so readers never see a partial file
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, static_cast<uint32_t>(params.config.base_channels));
    put_u32(os, static_cast<uint32_t>(ModelConfig::kRefinerHidden));
    put_u64(os, static_cast<uint64_t>(params.parameter_count()));
    for (const auto& p : params.parameters()) {
      for (double v : p->data) put_f64(os, v);
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("checkpoint rename failed: " + path);
  }
  if (!sidecar_json.empty()) {
    const std::string spath = checkpoint_sidecar_path(path);
    const std::string stmp = spath + ".tmp";
    std::ofstream os(stmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint sidecar: " + spath);
    os << sidecar_json << "\n";
    os.close();
    if (std::rename(stmp.c_str(), spath.c_str()) != 0) {
      throw std::runtime_error("sidecar rename failed: " + spath);
    }
  }
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, kMagic, 5) != 0) {
    throw std::runtime_error("not a UDHZ1 checkpoint: " + path);
  }
  const uint32_t base_channels = get_u32(is);
  const uint32_t refiner_hidden = get_u32(is);
  if (refiner_hidden != ModelConfig::kRefinerHidden) {
    throw std::runtime_error("checkpoint refiner width " + std::to_string(refiner_hidden) +
                             " unsupported (expected " +
                             std::to_string(ModelConfig::kRefinerHidden) + ")");
  }
  const uint64_t count = get_u64(is);
  ModelParams params = ModelParams::init(static_cast<int>(base_channels), 0);
  if (count != static_cast<uint64_t>(params.parameter_count())) {
    throw std::runtime_error("checkpoint parameter count " + std::to_string(count) +
                             " does not match architecture (" +
                             std::to_string(params.parameter_count()) + ")");
  }
  for (const auto& p : params.parameters()) {
    for (double& v : p->data) v = get_f64(is);
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return params;
}

}  // namespace udehaze
