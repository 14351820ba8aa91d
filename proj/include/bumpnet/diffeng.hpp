#pragma once

// Differentiation entry points: exact spatial derivatives of the model via
// second-order duals, and exact parameter gradients of generic scalar losses
// via chunked forward mode.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bumpnet/dual.hpp"
#include "bumpnet/error.hpp"
#include "bumpnet/model.hpp"

namespace bumpnet {

struct AxisDerivatives {
  double u = 0.0;
  double du = 0.0;
  double d2u = 0.0;
};

/// (u, du/dx_axis, d2u/dx_axis^2) of the model at x.
inline AxisDerivatives spatial_derivs(const BumpNetModel& model, std::span<const double> x, std::size_t axis) {
  require(x.size() == model.dim(), "point dimension does not match model");
  require(axis < model.dim(), "axis out of range");
  require(model.include_heights(), "spatial_derivs needs a model with heights");
  using D = Dual2<double>;
  std::vector<D> xs(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) xs[k] = k == axis ? D::variable(x[k], 0) : D(x[k]);
  D u(0.0);
  for (std::size_t i = 0; i < model.bump_count(); ++i) {
    const auto sh = model.shape(i);
    u = u + eval_bump<D, double>(sh.frame, sh.sharpness, xs) * model.height(i);
  }
  return {u.val, u.d1[0], u.d2[0]};
}

/// Exact gradient of a scalar loss written generically over its scalar type,
/// e.g. `[](auto theta) { ... }` taking std::span<const S> and returning S.
/// Evaluated in forward mode, kChunk coordinates per pass.
template <class Loss>
std::vector<double> param_grad(Loss&& loss, std::span<const double> theta) {
  constexpr std::size_t kChunk = 8;
  using T = Tangent<kChunk>;
  std::vector<double> grad(theta.size(), 0.0);
  std::vector<T> lifted(theta.size());
  for (std::size_t start = 0; start < theta.size(); start += kChunk) {
    for (std::size_t i = 0; i < theta.size(); ++i) lifted[i] = T(theta[i]);
    const std::size_t width = std::min(kChunk, theta.size() - start);
    for (std::size_t k = 0; k < width; ++k) lifted[start + k].d[k] = 1.0;
    const T value = loss(std::span<const T>(lifted));
    if (!std::isfinite(value.val)) throw NumericalError("param_grad: loss is not finite");
    for (std::size_t k = 0; k < width; ++k) grad[start + k] = value.d[k];
  }
  return grad;
}

}  // namespace bumpnet
