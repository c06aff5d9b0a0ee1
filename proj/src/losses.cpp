#include "losses.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace udehaze {

const std::vector<double>& dct_basis(int n) {
  static std::map<int, std::vector<double>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n != 8 && n != 16 && n != 32) {
    throw std::invalid_argument("dct_basis: unsupported size " + std::to_string(n) +
                                " (supported: 8, 16, 32)");
  }
  std::vector<double> b(static_cast<size_t>(n) * n);
  const double c0 = std::sqrt(1.0 / n);
  const double ck = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      b[static_cast<size_t>(k) * n + j] =
          (k == 0 ? c0 : ck) * std::cos(M_PI * (2.0 * j + 1.0) * k / (2.0 * n));
    }
  }
  return cache.emplace(n, std::move(b)).first->second;
}

namespace {

// y = B * x * B^T for one n x n tile with arbitrary row strides.
void dct2_tile(const double* x, int64_t x_stride, double* y, int64_t y_stride,
               const double* basis, int n, double* scratch) {
  // scratch = B * x  (n x n)
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int m = 0; m < n; ++m) {
        acc += basis[static_cast<size_t>(k) * n + m] * x[m * x_stride + j];
      }
      scratch[k * n + j] = acc;
    }
  }
  // y = scratch * B^T
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      double acc = 0.0;
      for (int m = 0; m < n; ++m) {
        acc += scratch[k * n + m] * basis[static_cast<size_t>(l) * n + m];
      }
      y[k * y_stride + l] = acc;
    }
  }
}

// adjoint: dx = B^T * dy * B
void dct2_tile_adjoint(const double* dy, int64_t dy_stride, double* dx,
                       int64_t dx_stride, const double* basis, int n,
                       double* scratch) {
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int m = 0; m < n; ++m) {
        acc += basis[static_cast<size_t>(m) * n + k] * dy[m * dy_stride + j];
      }
      scratch[k * n + j] = acc;
    }
  }
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      double acc = 0.0;
      for (int m = 0; m < n; ++m) {
        acc += scratch[k * n + m] * basis[static_cast<size_t>(m) * n + l];
      }
      dx[k * dx_stride + l] += acc;
    }
  }
}

}  // namespace

std::vector<double> dct2_patch(const std::vector<double>& patch, int n) {
  if (static_cast<int>(patch.size()) != n * n) {
    throw std::invalid_argument("dct2_patch: patch size does not match n*n");
  }
  const double* basis = dct_basis(n).data();
  std::vector<double> out(patch.size());
  std::vector<double> scratch(patch.size());
  dct2_tile(patch.data(), n, out.data(), n, basis, n, scratch.data());
  return out;
}

TensorPtr blockwise_dct2(const TensorPtr& x, int size) {
  if (x->shape.size() != 4) {
    throw std::invalid_argument("blockwise_dct2: expected NCHW, got " +
                                shape_str(x->shape));
  }
  const int64_t H = x->shape[2], W = x->shape[3];
  if (H % size != 0 || W % size != 0) {
    throw std::invalid_argument("blockwise_dct2: dims " + std::to_string(H) + "x" +
                                std::to_string(W) + " not divisible by patch size " +
                                std::to_string(size));
  }
  const double* basis = dct_basis(size).data();
  const int64_t planes = x->shape[0] * x->shape[1];
  std::vector<double> out(x->data.size());
  std::vector<double> scratch(static_cast<size_t>(size) * size);
  for (int64_t pl = 0; pl < planes; ++pl) {
    const double* xp = &x->data[pl * H * W];
    double* op = &out[pl * H * W];
    for (int64_t ty = 0; ty < H; ty += size) {
      for (int64_t tx = 0; tx < W; tx += size) {
        dct2_tile(xp + ty * W + tx, W, op + ty * W + tx, W, basis, size,
                  scratch.data());
      }
    }
  }
  TensorPtr xp = x;
  const int n = size;
  return make_node(x->shape, std::move(out), {x}, [xp, n, H, W, planes, basis](Tensor& t) {
    if (!xp->requires_grad) return;
    xp->ensure_grad();
    std::vector<double> scratch(static_cast<size_t>(n) * n);
    for (int64_t pl = 0; pl < planes; ++pl) {
      const double* gp = &t.grad[pl * H * W];
      double* dp = &xp->grad[pl * H * W];
      for (int64_t ty = 0; ty < H; ty += n) {
        for (int64_t tx = 0; tx < W; tx += n) {
          dct2_tile_adjoint(gp + ty * W + tx, W, dp + ty * W + tx, W, basis, n,
                            scratch.data());
        }
      }
    }
  });
}

TensorPtr loss_l1(const TensorPtr& j, const TensorPtr& j_gt) {
  return l1_distance(j, j_gt);
}

TensorPtr loss_dct(const TensorPtr& j, const TensorPtr& j_gt, const LossConfig& cfg) {
  if (j->shape != j_gt->shape) {
    throw std::invalid_argument("loss_dct: shape mismatch " + shape_str(j->shape) +
                                " vs " + shape_str(j_gt->shape));
  }
  TensorPtr total;
  for (size_t s = 0; s < cfg.dct_patch_sizes.size(); ++s) {
    const int size = cfg.dct_patch_sizes[s];
    auto dj = blockwise_dct2(j, size);
    auto dg = blockwise_dct2(j_gt, size);
    // mean over patches and channels of the per-patch L1 distance equals
    // size^2 times the elementwise mean of |coefficient differences|
    auto term = mul_scalar(l1_distance(dj, dg),
                           cfg.dct_weights[s] * static_cast<double>(size) * size);
    total = total ? add(total, term) : term;
  }
  return total;
}

TensorPtr loss_fwd(const TensorPtr& i, const TensorPtr& j, const TensorPtr& t,
                   const TensorPtr& a) {
  auto direct = mul(j, t);
  auto haze = channel_mul_nc(rsub_scalar(1.0, t), a);
  return l1_distance(add(direct, haze), i);
}

TensorPtr loss_a_reg(const TensorPtr& a, const TensorPtr& a_cl,
                     const TensorPtr& i_mean, const LossConfig& cfg) {
  if (a->shape.size() != 2 || a->shape[1] != 3) {
    throw std::invalid_argument("loss_a_reg: a must be (N,3), got " + shape_str(a->shape));
  }
  const double n = static_cast<double>(a->shape[0]);
  const double eps = cfg.eps_margin;

  auto anchor = l1_distance(a, a_cl);  // mean over batch and channels

  auto a_r = narrow(a, 1, 0, 1);
  auto a_g = narrow(a, 1, 1, 1);
  auto a_b = narrow(a, 1, 2, 1);
  // spectral ordering A_R <= A_G <= A_B, batch mean of the two hinges
  auto ordering = add(mean_all(relu(add_scalar(sub(a_r, a_g), eps))),
                      mean_all(relu(add_scalar(sub(a_g, a_b), eps))));

  // brightness floor: sum over channels, mean over batch
  auto brightness = mul_scalar(sum_all(relu(sub(i_mean, a))), 1.0 / n);

  return add(anchor, add(mul_scalar(ordering, cfg.mu[0]),
                         mul_scalar(brightness, cfg.mu[1])));
}

TensorPtr loss_beta_reg(const TensorPtr& beta, const LossConfig& cfg) {
  if (beta->shape.size() != 1 || beta->shape[0] != 3) {
    throw std::invalid_argument("loss_beta_reg: beta must be a length-3 vector");
  }
  const double eps = cfg.eps_margin;
  auto b_r = narrow(beta, 0, 0, 1);
  auto b_g = narrow(beta, 0, 1, 1);
  auto b_b = narrow(beta, 0, 2, 1);
  auto ordering = add(sum_all(relu(add_scalar(sub(b_g, b_r), eps))),
                      sum_all(relu(add_scalar(sub(b_b, b_g), eps))));
  auto over = sum_all(relu(add_scalar(beta, -cfg.beta_bounds[1])));
  auto under = sum_all(relu(rsub_scalar(cfg.beta_bounds[0], beta)));
  return add(ordering,
             add(mul_scalar(over, cfg.nu[0]), mul_scalar(under, cfg.nu[1])));
}

LossBreakdown loss_total(const TensorPtr& l1, const TensorPtr& dct,
                         const TensorPtr& fwd, const TensorPtr& a_reg,
                         const TensorPtr& beta_reg, const LossConfig& cfg) {
  LossBreakdown b;
  b.l1 = l1;
  b.dct = dct;
  b.fwd = fwd;
  b.a_reg = a_reg;
  b.beta_reg = beta_reg;
  b.total = add(add(add(mul_scalar(l1, cfg.lambda[0]), mul_scalar(dct, cfg.lambda[1])),
                    add(mul_scalar(fwd, cfg.lambda[2]), mul_scalar(a_reg, cfg.lambda[3]))),
                mul_scalar(beta_reg, cfg.lambda[4]));
  return b;
}

TensorPtr channel_means(const TensorPtr& image) {
  if (image->shape.size() != 4) {
    throw std::invalid_argument("channel_means: expected NCHW");
  }
  return mean_axis(mean_axis(image, 3), 2);
}

}  // namespace udehaze
