#pragma once

// Error metrics on a fixed uniform evaluation grid.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bumpnet/compiled.hpp"
#include "bumpnet/error.hpp"
#include "bumpnet/geometry.hpp"

namespace bumpnet {

/// sum |pred - exact| / sum |exact|
inline double rel_l1(std::span<const double> pred, std::span<const double> exact) {
  require(pred.size() == exact.size() && !pred.empty(), "rel_l1: grids differ in size or are empty");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    num += std::abs(pred[i] - exact[i]);
    den += std::abs(exact[i]);
  }
  require(den > 0.0, "rel_l1: exact field is identically zero");
  return num / den;
}

/// ||pred - exact||_2 / ||exact||_2
inline double rel_l2(std::span<const double> pred, std::span<const double> exact) {
  require(pred.size() == exact.size() && !pred.empty(), "rel_l2: grids differ in size or are empty");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    num += (pred[i] - exact[i]) * (pred[i] - exact[i]);
    den += exact[i] * exact[i];
  }
  require(den > 0.0, "rel_l2: exact field is identically zero");
  return std::sqrt(num / den);
}

inline double mse(std::span<const double> pred, std::span<const double> exact) {
  require(pred.size() == exact.size() && !pred.empty(), "mse: grids differ in size or are empty");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - exact[i]) * (pred[i] - exact[i]);
  return s / static_cast<double>(pred.size());
}

/// Tensor grid with `per_axis` nodes per axis, endpoints included; axis 0
/// varies fastest. Row-major points.
inline std::vector<double> uniform_grid(const BoundingBox& box, std::size_t per_axis) {
  require(per_axis >= 2, "evaluation grid needs at least 2 nodes per axis");
  const std::size_t n = box.dim();
  std::size_t total = 1;
  for (std::size_t j = 0; j < n; ++j) total *= per_axis;
  std::vector<double> pts(total * n);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t r = i;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = r % per_axis;
      r /= per_axis;
      pts[i * n + j] = box.lower[j] + box.extent(j) * static_cast<double>(k) / static_cast<double>(per_axis - 1);
    }
  }
  return pts;
}

/// Default evaluation resolution: 256 per axis, 64 from three dimensions up.
inline std::size_t default_grid_resolution(std::size_t dim) { return dim >= 3 ? 64 : 256; }

struct GridEvaluation {
  std::size_t dim = 0;
  std::vector<double> points;
  std::vector<double> pred;
  std::vector<double> exact;

  double rel_l1() const { return bumpnet::rel_l1(pred, exact); }
  double rel_l2() const { return bumpnet::rel_l2(pred, exact); }
  double mse() const { return bumpnet::mse(pred, exact); }
};

inline GridEvaluation evaluate_on_grid(const BumpNetModel& model, const std::function<double(const double*)>& exact,
                                       std::size_t per_axis = 0) {
  require(static_cast<bool>(exact), "evaluation needs an analytic solution");
  const std::size_t n = model.dim();
  GridEvaluation g;
  g.dim = n;
  g.points = uniform_grid(model.bbox(), per_axis ? per_axis : default_grid_resolution(n));
  const std::size_t count = g.points.size() / n;
  const CompiledModel cm(model);
  std::vector<double> cache(cm.cache_size());
  g.pred.resize(count);
  g.exact.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double* x = g.points.data() + i * n;
    g.pred[i] = cm.forward<0>(x, nullptr, cache.data()).u;
    g.exact[i] = exact(x);
  }
  return g;
}

}  // namespace bumpnet
