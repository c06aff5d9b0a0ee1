#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace udehaze {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major double tensor with reverse-mode automatic differentiation.
//
// The graph is built eagerly: every op returns a new tensor holding strong
// references to its inputs plus a closure that pushes gradients into them.
// Dropping the loss tensor frees the whole graph; leaf parameters survive.
//
// All reductions accumulate strictly left-to-right in flat index order, so
// results are bitwise reproducible across runs.
class Tensor : public std::enable_shared_from_this<Tensor> {
 public:
  std::vector<int64_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // sized like data once backward has run

  std::vector<TensorPtr> parents;
  std::function<void(Tensor&)> backward_fn;

  static TensorPtr create(std::vector<int64_t> shape, bool requires_grad = false);
  static TensorPtr create(std::vector<int64_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static TensorPtr full(std::vector<int64_t> shape, double value,
                        bool requires_grad = false);
  static TensorPtr scalar(double value, bool requires_grad = false);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t dim(size_t i) const { return shape[i]; }
  bool is_leaf() const { return parents.empty(); }

  // Value of a single-element tensor.
  double item() const;

  void ensure_grad();  // allocate zero-filled grad if absent
  void zero_grad();

 private:
  bool backward_ran_ = false;
  friend void backward(const TensorPtr& loss);
};

int64_t numel_of(const std::vector<int64_t>& shape);
std::string shape_str(const std::vector<int64_t>& shape);

// Graph node constructor shared by every op (including ops defined in other
// modules, e.g. the blockwise DCT in losses).
TensorPtr make_node(std::vector<int64_t> shape, std::vector<double> data,
                    std::vector<TensorPtr> parents,
                    std::function<void(Tensor&)> backward_fn);

// ---- elementwise ----
TensorPtr relu(const TensorPtr& x);
TensorPtr abs(const TensorPtr& x);
TensorPtr tanh(const TensorPtr& x);
TensorPtr sigmoid(const TensorPtr& x);
TensorPtr exp(const TensorPtr& x);
TensorPtr neg(const TensorPtr& x);
// Subgradient convention: 1 strictly inside (lo, hi), 0 at or outside bounds.
TensorPtr clamp(const TensorPtr& x, double lo, double hi);
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr div(const TensorPtr& a, const TensorPtr& b);
TensorPtr add_scalar(const TensorPtr& x, double s);
TensorPtr mul_scalar(const TensorPtr& x, double s);
TensorPtr rsub_scalar(double s, const TensorPtr& x);  // s - x
// max(x, s); gradient is 1 where x > s, 0 otherwise.
TensorPtr max_scalar(const TensorPtr& x, double s);

// ---- structural ----
TensorPtr concat_channels(const TensorPtr& a, const TensorPtr& b);  // NCHW, axis 1
TensorPtr narrow(const TensorPtr& x, size_t axis, int64_t start, int64_t len);
TensorPtr repeat_channel(const TensorPtr& x, int64_t channels);  // N1HW -> NCHW
// y[n,c,h,w] = x[n,c,h,w] * s[c] with a length-C vector s.
TensorPtr channel_scale(const TensorPtr& x, const TensorPtr& s);
// y[n,c,h,w] = x[n,c,h,w] * a[n,c] with an (N,C) tensor a.
TensorPtr channel_mul_nc(const TensorPtr& x, const TensorPtr& a);

// ---- reductions (fixed left-to-right accumulation) ----
TensorPtr sum_all(const TensorPtr& x);
TensorPtr mean_all(const TensorPtr& x);
TensorPtr mean_axis(const TensorPtr& x, size_t axis);
// Mean absolute difference over all elements.
TensorPtr l1_distance(const TensorPtr& a, const TensorPtr& b);

// ---- neural-net kernels ----
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int padding, int dilation);
// 2x bilinear upsampling, align-corners = false.
TensorPtr bilinear_upsample2x(const TensorPtr& x);

// ---- autodiff driver ----
void backward(const TensorPtr& loss);

// ---- optimizer ----
struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// AdamW with decoupled weight decay: the decay multiplies the weights
// directly and never enters the moment estimates.
class AdamW {
 public:
  AdamW(std::vector<TensorPtr> params, std::vector<std::string> names,
        AdamWConfig cfg);

  void step();
  void zero_grad();
  int64_t step_count() const { return step_count_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  std::vector<TensorPtr> params_;
  std::vector<std::string> names_;
  std::vector<Moments> moments_;
  AdamWConfig cfg_;
  int64_t step_count_ = 0;
};

}  // namespace udehaze
