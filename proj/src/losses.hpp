#pragma once

#include <array>
#include <vector>

#include "tensor.hpp"

namespace udehaze {

struct LossConfig {
  // weights of the five terms: l1, dct, fwd, a_reg, beta_reg
  std::array<double, 5> lambda{1.5, 0.8, 0.5, 0.1, 0.1};
  std::array<int, 3> dct_patch_sizes{8, 16, 32};
  std::array<double, 3> dct_weights{0.1, 0.8, 1.0};  // (w_s, w_m, w_l)
  std::array<double, 2> mu{0.2, 0.1};
  std::array<double, 2> nu{0.1, 0.1};
  double eps_margin = 0.01;
  std::array<double, 2> beta_bounds{0.05, 2.0};
};

// Per-term scalars; every field is a graph node so the total can be used for
// backpropagation while the breakdown is logged.
struct LossBreakdown {
  TensorPtr l1, dct, fwd, a_reg, beta_reg, total;
};

// Orthonormal DCT-II basis matrix for N in {8, 16, 32} (row-major NxN).
const std::vector<double>& dct_basis(int n);

// 2-D orthonormal DCT of one NxN patch: B * P * B^T.
std::vector<double> dct2_patch(const std::vector<double>& patch, int n);

// Differentiable blockwise 2-D DCT over an NCHW tensor: each non-overlapping
// size x size tile is replaced by its coefficient block.
TensorPtr blockwise_dct2(const TensorPtr& x, int size);

// Mean absolute difference; all image-domain L1 terms are means over
// elements so the loss weights stay resolution-independent.
TensorPtr loss_l1(const TensorPtr& j, const TensorPtr& j_gt);

// Multi-scale patchwise DCT loss: per scale, the mean over patches/channels of
// the per-patch L1 coefficient distance, then the weighted sum over scales.
TensorPtr loss_dct(const TensorPtr& j, const TensorPtr& j_gt, const LossConfig& cfg);

// Forward-model reconstruction loss ||J*t + A(1-t) - I||_1 (mean).
TensorPtr loss_fwd(const TensorPtr& i, const TensorPtr& j, const TensorPtr& t,
                   const TensorPtr& a);

// Atmospheric-light regularizer: anchor to the classical prior, spectral
// ordering hinges A_R <= A_G <= A_B, and A above the mean image brightness.
// a, a_cl, i_mean are (N,3); a_cl and i_mean are constants.
TensorPtr loss_a_reg(const TensorPtr& a, const TensorPtr& a_cl,
                     const TensorPtr& i_mean, const LossConfig& cfg);

// Attenuation regularizer: ordering hinges beta_R >= beta_G >= beta_B and the
// soft [beta_min, beta_max] bounds.
TensorPtr loss_beta_reg(const TensorPtr& beta, const LossConfig& cfg);

LossBreakdown loss_total(const TensorPtr& l1, const TensorPtr& dct,
                         const TensorPtr& fwd, const TensorPtr& a_reg,
                         const TensorPtr& beta_reg, const LossConfig& cfg);

// Per-image spatial mean of each channel as an (N,3) constant tensor.
TensorPtr channel_means(const TensorPtr& image);

}  // namespace udehaze
