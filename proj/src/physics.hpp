#pragma once

#include "tensor.hpp"

namespace udehaze {

// Shared physical constants of the formation model.
namespace bounds {
inline constexpr double kDepthMin = 0.1;
inline constexpr double kDepthMax = 10.0;
inline constexpr double kBetaMin = 0.05;
inline constexpr double kBetaMax = 2.0;
inline constexpr double kAtmosMin = 0.3;
inline constexpr double kAtmosMax = 1.0;
// Floor applied to the inversion denominator only; raw transmission can fall
// to exp(-20) at the depth/attenuation extremes, which would destroy both the
// reconstruction and its gradients.
inline constexpr double kTransmissionFloor = 0.01;
}  // namespace bounds

// Beer-Lambert transmission t_c = exp(-beta_c * D).
// depth: Nx1xHxW, beta: length-3 vector -> Nx3xHxW in (0, 1].
// strict = true rejects negative beta; training relies on soft penalties
// instead and passes strict = false.
TensorPtr transmission(const TensorPtr& depth, const TensorPtr& beta,
                       bool strict = false);

// Physics inversion J_raw = clamp_[0,1]((I - A(1-t)) / max(t, t_floor)).
// I, t: Nx3xHxW; A: (N,3).
TensorPtr invert(const TensorPtr& I, const TensorPtr& t, const TensorPtr& A,
                 double t_floor = bounds::kTransmissionFloor);

// Forward model I_hat = J*t + A*(1-t). No clamping; in-range inputs already
// bound the result to [0,1].
TensorPtr forward_model(const TensorPtr& J, const TensorPtr& t, const TensorPtr& A);

}  // namespace udehaze
