#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "image.hpp"
#include "physics.hpp"
#include "priors.hpp"
#include "tensor.hpp"

namespace udehaze {

struct ConvLayer {
  TensorPtr w;  // OIHW
  TensorPtr b;  // O
  int stride = 1;
  int padding = 1;
  int dilation = 1;
};

// Encoder-decoder depth estimator: three stride-2 encoder stages
// (3 -> C -> 2C -> 4C), a dilated bottleneck (rates 2, 4, 2) and a decoder
// that upsamples bilinearly and concatenates the matching encoder output.
// The head maps into [d_min, d_max] via a scaled sigmoid.
struct DepthNet {
  ConvLayer enc1, enc2, enc3;
  ConvLayer bot1, bot2, bot3;
  ConvLayer dec3a, dec3b, dec2a, dec2b, dec1a, dec1b;
  ConvLayer head;
};

// Atmospheric-light residual network: stride-2 conv stack, 1x1 head to three
// channels, global average pool, tanh. The classical prior enters additively
// outside the network.
struct ANet {
  ConvLayer c1, c2, c3;
  ConvLayer head;
};

// Shallow residual corrector, 3 -> 16 -> 16 -> 3; the final layer starts at
// zero so the module is the identity at initialization.
struct RefinerNet {
  ConvLayer r1, r2, r3;
};

struct ModelConfig {
  int base_channels = 16;
  static constexpr int kRefinerHidden = 16;
  static constexpr int kEncoderStages = 3;
  static constexpr std::array<int, 3> kBottleneckDilations{2, 4, 2};
  static constexpr double kGamma = 0.15;  // ANet residual scale
};

// The full learnable state. Parameter order is fixed and documented by
// parameter_names(); the checkpoint format serializes in exactly that order.
struct ModelParams {
  ModelConfig config;
  DepthNet depth;
  ANet anet;
  RefinerNet refiner;
  TensorPtr beta;  // (3,) attenuation coefficients, init (0.8, 0.4, 0.2)

  static ModelParams init(int base_channels, uint64_t seed);

  std::vector<TensorPtr> parameters() const;
  std::vector<std::string> parameter_names() const;
  int64_t parameter_count() const;
  void set_requires_grad(bool enabled);
  ModelParams clone() const;  // deep copy of values (no graph state)
};

struct ModelOutputs {
  TensorPtr depth;  // Nx1xHxW in [d_min, d_max]
  TensorPtr t;      // Nx3xHxW in (0, 1]
  TensorPtr a;      // (N,3) in [A_min, A_max]
  TensorPtr a_cl;   // (N,3) classical prior, constant w.r.t. the graph
  TensorPtr j_raw;  // Nx3xHxW in [0, 1]
  TensorPtr j;      // Nx3xHxW in [0, 1]
};

TensorPtr depthnet_forward(const ModelParams& params, const TensorPtr& image);
// a_cl is an (N,3) constant; returns the clamped per-channel light.
TensorPtr anet_forward(const ModelParams& params, const TensorPtr& image,
                       const TensorPtr& a_cl);
TensorPtr refiner_forward(const ModelParams& params, const TensorPtr& j_raw);

// Full pipeline on a batch; a_cl must be precomputed per image (the classical
// estimators are not differentiable and act as per-image constants).
ModelOutputs model_forward_batch(const ModelParams& params, const TensorPtr& image,
                                 const TensorPtr& a_cl);

// Convenience single-image entry: runs the classical priors, then the batch
// forward with N = 1.
ModelOutputs model_forward(const ModelParams& params, const ImageRGB& image,
                           const PriorConfig& prior_cfg);

// (N,3) tensor of classical priors for a batch of images.
TensorPtr classical_light_batch(const std::vector<const ImageRGB*>& imgs,
                                const PriorConfig& cfg);

// ---- checkpoint I/O ----
// Binary format: magic "UDHZ1", u32 base_channels, u32 refiner hidden width,
// u64 parameter count, then parameters as little-endian f64 in
// parameter_names() order. A JSON sidecar at <path>.json carries the config
// and validation metrics.
void save_checkpoint(const ModelParams& params, const std::string& path,
                     const std::string& sidecar_json);
ModelParams load_checkpoint(const std::string& path);
std::string checkpoint_sidecar_path(const std::string& path);

}  // namespace udehaze
