#include "physics.hpp"

#include <stdexcept>
#include <string>

namespace udehaze {

TensorPtr transmission(const TensorPtr& depth, const TensorPtr& beta, bool strict) {
  if (depth->shape.size() != 4 || depth->shape[1] != 1) {
    throw std::invalid_argument("transmission: depth must be Nx1xHxW, got " +
                                shape_str(depth->shape));
  }
  if (beta->shape.size() != 1 || beta->shape[0] != 3) {
    throw std::invalid_argument("transmission: beta must be a length-3 vector");
  }
  if (strict) {
    for (double b : beta->data) {
      if (b < 0.0) {
        throw std::invalid_argument("transmission: negative attenuation coefficient " +
                                    std::to_string(b));
      }
    }
  }
  auto d3 = repeat_channel(depth, 3);
  return exp(neg(channel_scale(d3, beta)));
}

TensorPtr invert(const TensorPtr& I, const TensorPtr& t, const TensorPtr& A,
                 double t_floor) {
  auto one_minus_t = rsub_scalar(1.0, t);
  auto haze = channel_mul_nc(one_minus_t, A);
  auto num = sub(I, haze);
  auto den = max_scalar(t, t_floor);
  return clamp(div(num, den), 0.0, 1.0);
}

TensorPtr forward_model(const TensorPtr& J, const TensorPtr& t, const TensorPtr& A) {
  auto direct = mul(J, t);
  auto haze = channel_mul_nc(rsub_scalar(1.0, t), A);
  return add(direct, haze);
}

}  // namespace udehaze
