#include "tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace udehaze {

int64_t numel_of(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

TensorPtr Tensor::create(std::vector<int64_t> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  t->shape = std::move(shape);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::create(std::vector<int64_t> shape, std::vector<double> data,
                         bool requires_grad) {
  if (static_cast<int64_t>(data.size()) != numel_of(shape)) {
    throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data = std::move(data);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::full(std::vector<int64_t> shape, double value, bool requires_grad) {
  auto t = create(std::move(shape), requires_grad);
  std::fill(t->data.begin(), t->data.end(), value);
  return t;
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
  return create({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (data.size() != 1) {
    throw std::runtime_error("item() on tensor of shape " + shape_str(shape));
  }
  return data[0];
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() { grad.clear(); }

TensorPtr make_node(std::vector<int64_t> shape, std::vector<double> data,
                    std::vector<TensorPtr> parents,
                    std::function<void(Tensor&)> backward_fn) {
  auto t = Tensor::create(std::move(shape), std::move(data), false);
  for (const auto& p : parents) {
    if (p->requires_grad) {
      t->requires_grad = true;
      break;
    }
  }
  if (t->requires_grad) {
    t->parents = std::move(parents);
    t->backward_fn = std::move(backward_fn);
  }
  return t;
}

namespace {

void check_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (a->shape != b->shape) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a->shape) + " vs " + shape_str(b->shape));
  }
}

void check_nonempty(const TensorPtr& x, const char* op) {
  if (x->numel() == 0) {
    throw std::invalid_argument(std::string(op) + ": empty tensor");
  }
}

// Unary op helper: f(value) and df(value, result) -> local derivative.
template <class F, class DF>
TensorPtr unary_op(const TensorPtr& x, F f, DF df) {
  const size_t n = x->data.size();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = f(x->data[i]);
  TensorPtr xp = x;
  return make_node(x->shape, std::move(out), {x}, [xp, df](Tensor& t) {
    if (!xp->requires_grad) return;
    xp->ensure_grad();
    const size_t n = t.data.size();
    for (size_t i = 0; i < n; ++i) {
      xp->grad[i] += t.grad[i] * df(xp->data[i], t.data[i]);
    }
  });
}

}  // namespace

TensorPtr relu(const TensorPtr& x) {
  return unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

TensorPtr abs(const TensorPtr& x) {
  return unary_op(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

TensorPtr tanh(const TensorPtr& x) {
  return unary_op(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

TensorPtr sigmoid(const TensorPtr& x) {
  return unary_op(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

TensorPtr exp(const TensorPtr& x) {
  return unary_op(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

TensorPtr neg(const TensorPtr& x) {
  return unary_op(
      x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

TensorPtr clamp(const TensorPtr& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  auto out = unary_op(
      x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
#ifndef NDEBUG
  for (double v : out->data) assert(v >= lo && v <= hi);
#endif
  return out;
}

TensorPtr add_scalar(const TensorPtr& x, double s) {
  return unary_op(
      x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

TensorPtr mul_scalar(const TensorPtr& x, double s) {
  return unary_op(
      x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

TensorPtr rsub_scalar(double s, const TensorPtr& x) {
  return unary_op(
      x, [s](double v) { return s - v; }, [](double, double) { return -1.0; });
}

TensorPtr max_scalar(const TensorPtr& x, double s) {
  return unary_op(
      x, [s](double v) { return v > s ? v : s; },
      [s](double v, double) { return v > s ? 1.0 : 0.0; });
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "add");
  const size_t n = a->data.size();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a->data[i] + b->data[i];
  TensorPtr ap = a, bp = b;
  return make_node(a->shape, std::move(out), {a, b}, [ap, bp](Tensor& t) {
    const size_t n = t.data.size();
    if (ap->requires_grad) {
      ap->ensure_grad();
      for (size_t i = 0; i < n; ++i) ap->grad[i] += t.grad[i];
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      for (size_t i = 0; i < n; ++i) bp->grad[i] += t.grad[i];
    }
  });
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "sub");
  const size_t n = a->data.size();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a->data[i] - b->data[i];
  TensorPtr ap = a, bp = b;
  return make_node(a->shape, std::move(out), {a, b}, [ap, bp](Tensor& t) {
    const size_t n = t.data.size();
    if (ap->requires_grad) {
      ap->ensure_grad();
      for (size_t i = 0; i < n; ++i) ap->grad[i] += t.grad[i];
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      for (size_t i = 0; i < n; ++i) bp->grad[i] -= t.grad[i];
    }
  });
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "mul");
  const size_t n = a->data.size();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a->data[i] * b->data[i];
  TensorPtr ap = a, bp = b;
  return make_node(a->shape, std::move(out), {a, b}, [ap, bp](Tensor& t) {
    const size_t n = t.data.size();
    if (ap->requires_grad) {
      ap->ensure_grad();
      for (size_t i = 0; i < n; ++i) ap->grad[i] += t.grad[i] * bp->data[i];
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      for (size_t i = 0; i < n; ++i) bp->grad[i] += t.grad[i] * ap->data[i];
    }
  });
}

TensorPtr div(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "div");
  const size_t n = a->data.size();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a->data[i] / b->data[i];
#ifndef NDEBUG
  for (double v : out) assert(std::isfinite(v) && "div produced non-finite value");
#endif
  TensorPtr ap = a, bp = b;
  return make_node(a->shape, std::move(out), {a, b}, [ap, bp](Tensor& t) {
    const size_t n = t.data.size();
    if (ap->requires_grad) {
      ap->ensure_grad();
      for (size_t i = 0; i < n; ++i) ap->grad[i] += t.grad[i] / bp->data[i];
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      for (size_t i = 0; i < n; ++i) {
        bp->grad[i] -= t.grad[i] * ap->data[i] / (bp->data[i] * bp->data[i]);
      }
    }
  });
}

TensorPtr concat_channels(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 4 || b->shape.size() != 4) {
    throw std::invalid_argument("concat_channels: expected NCHW tensors");
  }
  if (a->shape[0] != b->shape[0] || a->shape[2] != b->shape[2] ||
      a->shape[3] != b->shape[3]) {
    throw std::invalid_argument("concat_channels: shape mismatch " +
                                shape_str(a->shape) + " vs " + shape_str(b->shape));
  }
  const int64_t N = a->shape[0], Ca = a->shape[1], Cb = b->shape[1];
  const int64_t HW = a->shape[2] * a->shape[3];
  std::vector<double> out(static_cast<size_t>(N * (Ca + Cb) * HW));
  for (int64_t n = 0; n < N; ++n) {
    std::copy_n(a->data.begin() + n * Ca * HW, Ca * HW,
                out.begin() + n * (Ca + Cb) * HW);
    std::copy_n(b->data.begin() + n * Cb * HW, Cb * HW,
                out.begin() + n * (Ca + Cb) * HW + Ca * HW);
  }
  TensorPtr ap = a, bp = b;
  return make_node({N, Ca + Cb, a->shape[2], a->shape[3]}, std::move(out), {a, b},
                   [ap, bp, N, Ca, Cb, HW](Tensor& t) {
                     if (ap->requires_grad) {
                       ap->ensure_grad();
                       for (int64_t n = 0; n < N; ++n)
                         for (int64_t i = 0; i < Ca * HW; ++i)
                           ap->grad[n * Ca * HW + i] += t.grad[n * (Ca + Cb) * HW + i];
                     }
                     if (bp->requires_grad) {
                       bp->ensure_grad();
                       for (int64_t n = 0; n < N; ++n)
                         for (int64_t i = 0; i < Cb * HW; ++i)
                           bp->grad[n * Cb * HW + i] +=
                               t.grad[n * (Ca + Cb) * HW + Ca * HW + i];
                     }
                   });
}

TensorPtr narrow(const TensorPtr& x, size_t axis, int64_t start, int64_t len) {
  if (axis >= x->shape.size()) throw std::invalid_argument("narrow: axis out of range");
  if (start < 0 || len < 1 || start + len > x->shape[axis]) {
    throw std::invalid_argument("narrow: slice [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") out of bounds for " +
                                shape_str(x->shape));
  }
  int64_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= x->shape[i];
  for (size_t i = axis + 1; i < x->shape.size(); ++i) inner *= x->shape[i];
  const int64_t dim = x->shape[axis];

  std::vector<int64_t> out_shape = x->shape;
  out_shape[axis] = len;
  std::vector<double> out(static_cast<size_t>(outer * len * inner));
  for (int64_t o = 0; o < outer; ++o) {
    std::copy_n(x->data.begin() + (o * dim + start) * inner, len * inner,
                out.begin() + o * len * inner);
  }
  TensorPtr xp = x;
  return make_node(std::move(out_shape), std::move(out), {x},
                   [xp, outer, inner, dim, start, len](Tensor& t) {
                     if (!xp->requires_grad) return;
                     xp->ensure_grad();
                     for (int64_t o = 0; o < outer; ++o)
                       for (int64_t i = 0; i < len * inner; ++i)
                         xp->grad[(o * dim + start) * inner + i] +=
                             t.grad[o * len * inner + i];
                   });
}

TensorPtr repeat_channel(const TensorPtr& x, int64_t channels) {
  if (x->shape.size() != 4 || x->shape[1] != 1) {
    throw std::invalid_argument("repeat_channel: expected N1HW, got " +
                                shape_str(x->shape));
  }
  if (channels < 1) throw std::invalid_argument("repeat_channel: channels < 1");
  const int64_t N = x->shape[0], HW = x->shape[2] * x->shape[3];
  std::vector<double> out(static_cast<size_t>(N * channels * HW));
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < channels; ++c)
      std::copy_n(x->data.begin() + n * HW, HW, out.begin() + (n * channels + c) * HW);
  TensorPtr xp = x;
  return make_node({N, channels, x->shape[2], x->shape[3]}, std::move(out), {x},
                   [xp, N, channels, HW](Tensor& t) {
                     if (!xp->requires_grad) return;
                     xp->ensure_grad();
                     for (int64_t n = 0; n < N; ++n)
                       for (int64_t c = 0; c < channels; ++c)
                         for (int64_t i = 0; i < HW; ++i)
                           xp->grad[n * HW + i] += t.grad[(n * channels + c) * HW + i];
                   });
}

TensorPtr channel_scale(const TensorPtr& x, const TensorPtr& s) {
  if (x->shape.size() != 4) {
    throw std::invalid_argument("channel_scale: expected NCHW, got " + shape_str(x->shape));
  }
  if (s->shape.size() != 1 || s->shape[0] != x->shape[1]) {
    throw std::invalid_argument("channel_scale: scale shape " + shape_str(s->shape) +
                                " does not match channels of " + shape_str(x->shape));
  }
  const int64_t N = x->shape[0], C = x->shape[1], HW = x->shape[2] * x->shape[3];
  std::vector<double> out(x->data.size());
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const double sv = s->data[c];
      const double* xi = &x->data[(n * C + c) * HW];
      double* oi = &out[(n * C + c) * HW];
      for (int64_t i = 0; i < HW; ++i) oi[i] = xi[i] * sv;
    }
  TensorPtr xp = x, sp = s;
  return make_node(x->shape, std::move(out), {x, s}, [xp, sp, N, C, HW](Tensor& t) {
    if (xp->requires_grad) {
      xp->ensure_grad();
      for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
          const double sv = sp->data[c];
          for (int64_t i = 0; i < HW; ++i)
            xp->grad[(n * C + c) * HW + i] += t.grad[(n * C + c) * HW + i] * sv;
        }
    }
    if (sp->requires_grad) {
      sp->ensure_grad();
      for (int64_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int64_t n = 0; n < N; ++n) {
          const double* xi = &xp->data[(n * C + c) * HW];
          const double* gi = &t.grad[(n * C + c) * HW];
          for (int64_t i = 0; i < HW; ++i) acc += gi[i] * xi[i];
        }
        sp->grad[c] += acc;
      }
    }
  });
}

TensorPtr channel_mul_nc(const TensorPtr& x, const TensorPtr& a) {
  if (x->shape.size() != 4) {
    throw std::invalid_argument("channel_mul_nc: expected NCHW, got " + shape_str(x->shape));
  }
  if (a->shape.size() != 2 || a->shape[0] != x->shape[0] || a->shape[1] != x->shape[1]) {
    throw std::invalid_argument("channel_mul_nc: (N,C) tensor " + shape_str(a->shape) +
                                " does not match " + shape_str(x->shape));
  }
  const int64_t N = x->shape[0], C = x->shape[1], HW = x->shape[2] * x->shape[3];
  std::vector<double> out(x->data.size());
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double av = a->data[nc];
    const double* xi = &x->data[nc * HW];
    double* oi = &out[nc * HW];
    for (int64_t i = 0; i < HW; ++i) oi[i] = xi[i] * av;
  }
  TensorPtr xp = x, ap = a;
  return make_node(x->shape, std::move(out), {x, a}, [xp, ap, N, C, HW](Tensor& t) {
    if (xp->requires_grad) {
      xp->ensure_grad();
      for (int64_t nc = 0; nc < N * C; ++nc) {
        const double av = ap->data[nc];
        for (int64_t i = 0; i < HW; ++i)
          xp->grad[nc * HW + i] += t.grad[nc * HW + i] * av;
      }
    }
    if (ap->requires_grad) {
      ap->ensure_grad();
      for (int64_t nc = 0; nc < N * C; ++nc) {
        double acc = 0.0;
        const double* xi = &xp->data[nc * HW];
        const double* gi = &t.grad[nc * HW];
        for (int64_t i = 0; i < HW; ++i) acc += gi[i] * xi[i];
        ap->grad[nc] += acc;
      }
    }
  });
}

TensorPtr sum_all(const TensorPtr& x) {
  check_nonempty(x, "sum_all");
  double acc = 0.0;
  for (double v : x->data) acc += v;
  TensorPtr xp = x;
  return make_node({1}, {acc}, {x}, [xp](Tensor& t) {
    if (!xp->requires_grad) return;
    xp->ensure_grad();
    const double g = t.grad[0];
    for (double& gv : xp->grad) gv += g;
  });
}

TensorPtr mean_all(const TensorPtr& x) {
  check_nonempty(x, "mean_all");
  double acc = 0.0;
  for (double v : x->data) acc += v;
  const double inv_n = 1.0 / static_cast<double>(x->numel());
  TensorPtr xp = x;
  return make_node({1}, {acc * inv_n}, {x}, [xp, inv_n](Tensor& t) {
    if (!xp->requires_grad) return;
    xp->ensure_grad();
    const double g = t.grad[0] * inv_n;
    for (double& gv : xp->grad) gv += g;
  });
}

TensorPtr mean_axis(const TensorPtr& x, size_t axis) {
  if (axis >= x->shape.size()) throw std::invalid_argument("mean_axis: axis out of range");
  check_nonempty(x, "mean_axis");
  int64_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= x->shape[i];
  for (size_t i = axis + 1; i < x->shape.size(); ++i) inner *= x->shape[i];
  const int64_t dim = x->shape[axis];
  if (dim == 0) throw std::invalid_argument("mean_axis: empty axis");

  std::vector<int64_t> out_shape;
  for (size_t i = 0; i < x->shape.size(); ++i)
    if (i != axis) out_shape.push_back(x->shape[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  std::vector<double> out(static_cast<size_t>(outer * inner), 0.0);
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t k = 0; k < dim; ++k) {
      const double* xi = &x->data[(o * dim + k) * inner];
      double* oi = &out[o * inner];
      for (int64_t i = 0; i < inner; ++i) oi[i] += xi[i];
    }
  const double inv = 1.0 / static_cast<double>(dim);
  for (double& v : out) v *= inv;

  TensorPtr xp = x;
  return make_node(std::move(out_shape), std::move(out), {x},
                   [xp, outer, inner, dim, inv](Tensor& t) {
                     if (!xp->requires_grad) return;
                     xp->ensure_grad();
                     for (int64_t o = 0; o < outer; ++o)
                       for (int64_t k = 0; k < dim; ++k) {
                         double* gi = &xp->grad[(o * dim + k) * inner];
                         const double* gt = &t.grad[o * inner];
                         for (int64_t i = 0; i < inner; ++i) gi[i] += gt[i] * inv;
                       }
                   });
}

TensorPtr l1_distance(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "l1_distance");
  return mean_all(abs(sub(a, b)));
}

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int padding, int dilation) {
  if (x->shape.size() != 4) {
    throw std::invalid_argument("conv2d: input must be NCHW, got " + shape_str(x->shape));
  }
  if (w->shape.size() != 4) {
    throw std::invalid_argument("conv2d: weight must be OIHW, got " + shape_str(w->shape));
  }
  if (stride < 1 || dilation < 1 || padding < 0) {
    throw std::invalid_argument("conv2d: stride/dilation must be >= 1, padding >= 0");
  }
  const int64_t N = x->shape[0], Cin = x->shape[1], H = x->shape[2], W = x->shape[3];
  const int64_t Cout = w->shape[0], KH = w->shape[2], KW = w->shape[3];
  if (w->shape[1] != Cin) {
    throw std::invalid_argument("conv2d: weight expects " + std::to_string(w->shape[1]) +
                                " input channels, input has " + std::to_string(Cin));
  }
  if (b->shape.size() != 1 || b->shape[0] != Cout) {
    throw std::invalid_argument("conv2d: bias shape " + shape_str(b->shape) +
                                " does not match " + std::to_string(Cout) + " filters");
  }
  const int64_t OH = (H + 2 * padding - dilation * (KH - 1) - 1) / stride + 1;
  const int64_t OW = (W + 2 * padding - dilation * (KW - 1) - 1) / stride + 1;
  if (OH < 1 || OW < 1) {
    throw std::invalid_argument("conv2d: kernel does not fit input " + shape_str(x->shape));
  }

  std::vector<double> out(static_cast<size_t>(N * Cout * OH * OW));
  const int64_t s = stride, p = padding, d = dilation;

  for (int64_t n = 0; n < N; ++n) {
    for (int64_t oc = 0; oc < Cout; ++oc) {
      double* oplane = &out[(n * Cout + oc) * OH * OW];
      const double bias = b->data[oc];
      for (int64_t i = 0; i < OH * OW; ++i) oplane[i] = bias;
      for (int64_t ic = 0; ic < Cin; ++ic) {
        const double* xplane = &x->data[(n * Cin + ic) * H * W];
        const double* wk = &w->data[((oc * Cin + ic) * KH) * KW];
        for (int64_t oy = 0; oy < OH; ++oy) {
          double* orow = &oplane[oy * OW];
          for (int64_t ky = 0; ky < KH; ++ky) {
            const int64_t iy = oy * s - p + ky * d;
            if (iy < 0 || iy >= H) continue;
            const double* xrow = &xplane[iy * W];
            for (int64_t kx = 0; kx < KW; ++kx) {
              const double wv = wk[ky * KW + kx];
              const int64_t off = kx * d - p;
              // valid ox range: 0 <= ox*s + off < W
              int64_t lo = off < 0 ? (-off + s - 1) / s : 0;
              int64_t hi = std::min(OW, off < W ? (W - off + s - 1) / s : int64_t{0});
              for (int64_t ox = lo; ox < hi; ++ox) orow[ox] += wv * xrow[ox * s + off];
            }
          }
        }
      }
    }
  }

  TensorPtr xp = x, wp = w, bp = b;
  return make_node(
      {N, Cout, OH, OW}, std::move(out), {x, w, b},
      [xp, wp, bp, N, Cin, H, W, Cout, KH, KW, OH, OW, s, p, d](Tensor& t) {
        if (bp->requires_grad) {
          bp->ensure_grad();
          for (int64_t oc = 0; oc < Cout; ++oc) {
            double acc = 0.0;
            for (int64_t n = 0; n < N; ++n) {
              const double* g = &t.grad[(n * Cout + oc) * OH * OW];
              for (int64_t i = 0; i < OH * OW; ++i) acc += g[i];
            }
            bp->grad[oc] += acc;
          }
        }
        if (wp->requires_grad) {
          wp->ensure_grad();
          for (int64_t oc = 0; oc < Cout; ++oc) {
            for (int64_t ic = 0; ic < Cin; ++ic) {
              for (int64_t ky = 0; ky < KH; ++ky) {
                for (int64_t kx = 0; kx < KW; ++kx) {
                  const int64_t off = kx * d - p;
                  int64_t lo = off < 0 ? (-off + s - 1) / s : 0;
                  int64_t hi = std::min(OW, off < W ? (W - off + s - 1) / s : int64_t{0});
                  double acc = 0.0;
                  for (int64_t n = 0; n < N; ++n) {
                    const double* gplane = &t.grad[(n * Cout + oc) * OH * OW];
                    const double* xplane = &xp->data[(n * Cin + ic) * H * W];
                    for (int64_t oy = 0; oy < OH; ++oy) {
                      const int64_t iy = oy * s - p + ky * d;
                      if (iy < 0 || iy >= H) continue;
                      const double* grow = &gplane[oy * OW];
                      const double* xrow = &xplane[iy * W];
                      for (int64_t ox = lo; ox < hi; ++ox)
                        acc += grow[ox] * xrow[ox * s + off];
                    }
                  }
                  wp->grad[((oc * Cin + ic) * KH + ky) * KW + kx] += acc;
                }
              }
            }
          }
        }
        if (xp->requires_grad) {
          xp->ensure_grad();
          for (int64_t n = 0; n < N; ++n) {
            for (int64_t oc = 0; oc < Cout; ++oc) {
              const double* gplane = &t.grad[(n * Cout + oc) * OH * OW];
              for (int64_t ic = 0; ic < Cin; ++ic) {
                double* dxplane = &xp->grad[(n * Cin + ic) * H * W];
                const double* wk = &wp->data[((oc * Cin + ic) * KH) * KW];
                for (int64_t oy = 0; oy < OH; ++oy) {
                  const double* grow = &gplane[oy * OW];
                  for (int64_t ky = 0; ky < KH; ++ky) {
                    const int64_t iy = oy * s - p + ky * d;
                    if (iy < 0 || iy >= H) continue;
                    double* dxrow = &dxplane[iy * W];
                    for (int64_t kx = 0; kx < KW; ++kx) {
                      const double wv = wk[ky * KW + kx];
                      const int64_t off = kx * d - p;
                      int64_t lo = off < 0 ? (-off + s - 1) / s : 0;
                      int64_t hi =
                          std::min(OW, off < W ? (W - off + s - 1) / s : int64_t{0});
                      for (int64_t ox = lo; ox < hi; ++ox)
                        dxrow[ox * s + off] += wv * grow[ox];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

TensorPtr bilinear_upsample2x(const TensorPtr& x) {
  if (x->shape.size() != 4) {
    throw std::invalid_argument("bilinear_upsample2x: expected NCHW, got " +
                                shape_str(x->shape));
  }
  const int64_t N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
  const int64_t OH = 2 * H, OW = 2 * W;

  // Source taps per output index, align-corners = false.
  auto taps = [](int64_t out_len, int64_t in_len, std::vector<int64_t>& i0,
                 std::vector<int64_t>& i1, std::vector<double>& w1) {
    i0.resize(out_len);
    i1.resize(out_len);
    w1.resize(out_len);
    for (int64_t o = 0; o < out_len; ++o) {
      double src = (static_cast<double>(o) + 0.5) * 0.5 - 0.5;
      if (src < 0.0) src = 0.0;
      const double max_src = static_cast<double>(in_len - 1);
      if (src > max_src) src = max_src;
      const int64_t lo = static_cast<int64_t>(src);
      i0[o] = lo;
      i1[o] = std::min(lo + 1, in_len - 1);
      w1[o] = src - static_cast<double>(lo);
    }
  };
  std::vector<int64_t> y0, y1, x0, x1;
  std::vector<double> wy, wx;
  taps(OH, H, y0, y1, wy);
  taps(OW, W, x0, x1, wx);

  std::vector<double> out(static_cast<size_t>(N * C * OH * OW));
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* xplane = &x->data[nc * H * W];
    double* oplane = &out[nc * OH * OW];
    for (int64_t oy = 0; oy < OH; ++oy) {
      const double* r0 = &xplane[y0[oy] * W];
      const double* r1 = &xplane[y1[oy] * W];
      const double fy = wy[oy];
      double* orow = &oplane[oy * OW];
      for (int64_t ox = 0; ox < OW; ++ox) {
        const double fx = wx[ox];
        const double top = r0[x0[ox]] * (1.0 - fx) + r0[x1[ox]] * fx;
        const double bot = r1[x0[ox]] * (1.0 - fx) + r1[x1[ox]] * fx;
        orow[ox] = top * (1.0 - fy) + bot * fy;
      }
    }
  }

  TensorPtr xp = x;
  return make_node({N, C, OH, OW}, std::move(out), {x},
                   [xp, N, C, H, W, OH, OW, y0, y1, x0, x1, wy, wx](Tensor& t) {
                     if (!xp->requires_grad) return;
                     xp->ensure_grad();
                     for (int64_t nc = 0; nc < N * C; ++nc) {
                       double* dx = &xp->grad[nc * H * W];
                       const double* g = &t.grad[nc * OH * OW];
                       for (int64_t oy = 0; oy < OH; ++oy) {
                         const double fy = wy[oy];
                         for (int64_t ox = 0; ox < OW; ++ox) {
                           const double fx = wx[ox];
                           const double gv = g[oy * OW + ox];
                           dx[y0[oy] * W + x0[ox]] += gv * (1.0 - fy) * (1.0 - fx);
                           dx[y0[oy] * W + x1[ox]] += gv * (1.0 - fy) * fx;
                           dx[y1[oy] * W + x0[ox]] += gv * fy * (1.0 - fx);
                           dx[y1[oy] * W + x1[ox]] += gv * fy * fx;
                         }
                       }
                     }
                   });
}

void backward(const TensorPtr& loss) {
  if (loss->numel() != 1) {
    throw std::runtime_error("backward: loss must be scalar, got shape " +
                             shape_str(loss->shape));
  }
  if (loss->backward_ran_) {
    throw std::runtime_error("backward: already run on this graph; reset grads and rebuild");
  }
  loss->backward_ran_ = true;

  // Iterative post-order DFS over parents.
  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> visited;
  std::vector<std::pair<Tensor*, size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Tensor* parent = node->parents[idx].get();
      ++idx;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
}

AdamW::AdamW(std::vector<TensorPtr> params, std::vector<std::string> names,
             AdamWConfig cfg)
    : params_(std::move(params)), names_(std::move(names)), cfg_(cfg) {
  if (params_.size() != names_.size()) {
    throw std::invalid_argument("AdamW: params/names size mismatch");
  }
  if (cfg_.lr <= 0 || cfg_.beta1 <= 0 || cfg_.beta2 <= 0 || cfg_.eps <= 0 ||
      cfg_.weight_decay < 0) {
    throw std::invalid_argument("AdamW: hyperparameters must be positive");
  }
  moments_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    moments_[i].m.assign(params_[i]->data.size(), 0.0);
    moments_[i].v.assign(params_[i]->data.size(), 0.0);
  }
}

void AdamW::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    p.ensure_grad();
    auto& mom = moments_[i];
    for (size_t j = 0; j < p.data.size(); ++j) {
      const double g = p.grad[j];
      if (!std::isfinite(g)) {
        throw std::runtime_error("AdamW: non-finite gradient in parameter '" +
                                 names_[i] + "'");
      }
      // decoupled decay, applied to the weight itself
      p.data[j] -= cfg_.lr * cfg_.weight_decay * p.data[j];
      mom.m[j] = cfg_.beta1 * mom.m[j] + (1.0 - cfg_.beta1) * g;
      mom.v[j] = cfg_.beta2 * mom.v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = mom.m[j] / bc1;
      const double vhat = mom.v[j] / bc2;
      p.data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

}  // namespace udehaze
