#pragma once

// BumpNet model: the trainable raw parametrization, its map to geometry,
// grid initialization and the reference (generic scalar) evaluators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bumpnet/dual.hpp"
#include "bumpnet/error.hpp"
#include "bumpnet/geometry.hpp"

namespace bumpnet {

/// Index map of one bump's block inside the flat raw parameter vector:
///   [a_1..a_{n-1} | W_1..W_n | v_1..v_n | P | h]
/// with side l = exp(W), center through tanh(v), sharpness p = exp(P).
/// The trailing height h is absent for height-free (trunk) models.
struct RawLayout {
  static constexpr const char* kVersion = "bumpnet.raw.v1";

  std::size_t dim = 2;
  bool include_heights = true;

  std::size_t rotation_offset() const { return 0; }
  std::size_t log_side_offset() const { return dim - 1; }
  std::size_t center_offset() const { return 2 * dim - 1; }
  std::size_t log_sharpness_offset() const { return 3 * dim - 1; }
  std::size_t height_offset() const { return 3 * dim; }
  /// Parameters that shape the basis function (everything except h).
  std::size_t shape_size() const { return 3 * dim; }
  std::size_t per_bump() const { return 3 * dim + (include_heights ? 1 : 0); }

  bool operator==(const RawLayout&) const = default;
};

/// Shape of one bump as a function of its raw block, in any scalar type.
template <class S>
struct BumpShape {
  BasicFrame<S> frame;
  S sharpness;
  std::vector<S> center;
  std::vector<S> sides;
};

/// sides = exp(W); center_j = lo_j + (tanh(v_j) + 1)/2 * (hi_j - lo_j);
/// sharpness = exp(P); then biases from the geometry.
template <class S>
BumpShape<S> shape_from_raw(std::span<const S> block, const BoundingBox& box) {
  using std::exp;
  using std::tanh;
  const std::size_t n = box.dim();
  const RawLayout lay{n, false};
  BumpShape<S> out;
  out.frame.dim = n;
  out.frame.directions = gram_schmidt_frame<S>(block.subspan(lay.rotation_offset(), n - 1));
  out.sides.resize(n);
  out.center.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.sides[j] = exp(block[lay.log_side_offset() + j]);
    out.center[j] = S(box.lower[j]) +
                    S(0.5 * box.extent(j)) * (tanh(block[lay.center_offset() + j]) + S(1.0));
  }
  out.sharpness = exp(block[lay.log_sharpness_offset()]);
  geometry_to_biases<S>(out.center, out.sides, out.frame);
  return out;
}

/// psi(x) = squash(sum_j tanh(p(x.beta_j + s_j)) + tanh(p(-x.beta_j + sbar_j)) - (2n-1)),
/// squash(y) = (1 + tanh(p y)) / 2.
///
/// R is the result/point type and F the frame type; R * F must yield R.
template <class R, class F>
R eval_bump(const BasicFrame<F>& f, const F& p, std::span<const R> x) {
  using std::tanh;
  const std::size_t n = f.dim;
  R sum(-(2.0 * static_cast<double>(n) - 1.0));
  for (std::size_t j = 0; j < n; ++j) {
    R z(0.0);
    for (std::size_t k = 0; k < n; ++k) z = z + x[k] * f.beta(j, k);
    sum = sum + tanh((z + f.s[j]) * p) + tanh((f.sbar[j] - z) * p);
  }
  return R(0.5) * (R(1.0) + tanh(sum * p));
}

class BumpNetModel {
 public:
  BumpNetModel() = default;

  BumpNetModel(BoundingBox box, std::size_t bumps, bool include_heights, std::vector<double> raw)
      : box_(std::move(box)), layout_{box_.dim(), include_heights}, bumps_(bumps), raw_(std::move(raw)) {
    box_.validate();
    require(bumps_ >= 1, "a BumpNet needs at least one bump");
    require(raw_.size() == bumps_ * layout_.per_bump(),
            "raw parameter vector has length " + std::to_string(raw_.size()) + ", expected " +
                std::to_string(bumps_ * layout_.per_bump()));
  }

  std::size_t dim() const { return box_.dim(); }
  std::size_t bump_count() const { return bumps_; }
  bool include_heights() const { return layout_.include_heights; }
  const BoundingBox& bbox() const { return box_; }
  const RawLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return raw_.size(); }

  std::span<const double> raw() const { return raw_; }
  std::span<double> raw() { return raw_; }

  std::span<const double> block(std::size_t i) const {
    return std::span<const double>(raw_).subspan(i * layout_.per_bump(), layout_.per_bump());
  }
  std::span<double> block(std::size_t i) {
    return std::span<double>(raw_).subspan(i * layout_.per_bump(), layout_.per_bump());
  }

  double height(std::size_t i) const { return layout_.include_heights ? block(i)[layout_.height_offset()] : 1.0; }

  BumpShape<double> shape(std::size_t i) const {
    return shape_from_raw<double>(block(i).first(layout_.shape_size()), box_);
  }

  BumpGeometry geometry(std::size_t i) const {
    const auto b = block(i);
    const auto sh = shape(i);
    BumpGeometry g;
    g.center = sh.center;
    g.sides = sh.sides;
    g.rotation.assign(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(dim() - 1));
    g.sharpness = sh.sharpness;
    g.height = height(i);
    return g;
  }

  std::vector<BumpGeometry> geometries() const {
    std::vector<BumpGeometry> out;
    out.reserve(bumps_);
    for (std::size_t i = 0; i < bumps_; ++i) out.push_back(geometry(i));
    return out;
  }

  /// Drops the given bumps (indices into the current model), keeping order.
  void remove_bumps(std::vector<std::size_t> indices) {
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    require(indices.size() < bumps_, "pruning would remove every bump");
    std::vector<double> kept;
    kept.reserve(raw_.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < bumps_; ++i) {
      if (next < indices.size() && indices[next] == i) {
        ++next;
        continue;
      }
      const auto b = block(i);
      kept.insert(kept.end(), b.begin(), b.end());
    }
    bumps_ -= indices.size();
    raw_ = std::move(kept);
  }

  bool operator==(const BumpNetModel&) const = default;

 private:
  BoundingBox box_;
  RawLayout layout_;
  std::size_t bumps_ = 0;
  std::vector<double> raw_;
};

/// Interpretable geometry of every bump.
inline std::vector<BumpGeometry> raw_to_geometry(const BumpNetModel& model) { return model.geometries(); }

/// Raw block reproducing a geometry. The center must lie strictly inside the box.
inline std::vector<double> geometry_to_raw(const BumpGeometry& g, const BoundingBox& box, bool include_heights) {
  const std::size_t n = box.dim();
  require(g.dim() == n && g.sides.size() == n && g.rotation.size() + 1 == n, "geometry dimension mismatch");
  require(g.sharpness > 0.0, "sharpness must be positive");
  const RawLayout lay{n, include_heights};
  std::vector<double> block(lay.per_bump(), 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) block[lay.rotation_offset() + k] = g.rotation[k];
  for (std::size_t j = 0; j < n; ++j) {
    require(g.sides[j] > 0.0, "bump sides must be strictly positive");
    const double u = 2.0 * (g.center[j] - box.lower[j]) / box.extent(j) - 1.0;
    require(u > -1.0 && u < 1.0, "bump center must lie strictly inside the bounding box");
    block[lay.log_side_offset() + j] = std::log(g.sides[j]);
    block[lay.center_offset() + j] = std::atanh(u);
  }
  block[lay.log_sharpness_offset()] = std::log(g.sharpness);
  if (include_heights) block[lay.height_offset()] = g.height;
  return block;
}

inline BumpNetModel model_from_geometry(const std::vector<BumpGeometry>& bumps, const BoundingBox& box,
                                        bool include_heights = true) {
  std::vector<double> raw;
  for (const auto& g : bumps) {
    auto b = geometry_to_raw(g, box, include_heights);
    raw.insert(raw.end(), b.begin(), b.end());
  }
  return BumpNetModel(box, bumps.size(), include_heights, std::move(raw));
}

/// Initial effective sharpness; stored raw as its log.
inline constexpr double kInitialSharpness = 3.5;
inline const double kInitialLogSharpness = std::log(kInitialSharpness);

/// Axis-aligned bumps tiling the box without gaps: counts[j] cells along
/// axis j, axis 0 varying fastest. Heights start at 1.
inline BumpNetModel init_grid(const std::vector<std::size_t>& counts, const BoundingBox& box,
                              bool include_heights = true, double sharpness = kInitialSharpness) {
  box.validate();
  require(sharpness > 0.0 && std::isfinite(sharpness), "initial sharpness must be positive");
  const std::size_t n = box.dim();
  require(counts.size() == n, "grid counts must have one entry per dimension");
  for (std::size_t c : counts) require(c >= 1, "grid counts must be at least 1");
  const std::size_t m = std::accumulate(counts.begin(), counts.end(), std::size_t{1}, std::multiplies<>());
  const RawLayout lay{n, include_heights};
  std::vector<double> raw(m * lay.per_bump(), 0.0);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t i = 0; i < m; ++i) {
    double* b = raw.data() + i * lay.per_bump();
    for (std::size_t j = 0; j < n; ++j) {
      const double cells = static_cast<double>(counts[j]);
      b[lay.log_side_offset() + j] = std::log(box.extent(j) / cells);
      b[lay.center_offset() + j] = std::atanh((2.0 * static_cast<double>(idx[j]) + 1.0) / cells - 1.0);
    }
    b[lay.log_sharpness_offset()] = sharpness == kInitialSharpness ? kInitialLogSharpness : std::log(sharpness);
    if (include_heights) b[lay.height_offset()] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (++idx[j] < counts[j]) break;
      idx[j] = 0;
    }
  }
  return BumpNetModel(box, m, include_heights, std::move(raw));
}

/// psi_i(x) for a single bump of the model (reference evaluator).
inline double eval_bump(const BumpNetModel& model, std::size_t i, std::span<const double> x) {
  require(x.size() == model.dim(), "point dimension does not match model");
  const auto sh = model.shape(i);
  return eval_bump<double, double>(sh.frame, sh.sharpness, x);
}

/// [psi_1(x), ..., psi_m(x)].
inline std::vector<double> eval_basis(const BumpNetModel& model, std::span<const double> x) {
  require(x.size() == model.dim(), "point dimension does not match model");
  std::vector<double> out(model.bump_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = eval_bump(model, i, x);
  return out;
}

/// sum_i h_i psi_i(x). Height-free models have no output of their own; use eval_basis.
inline double eval_model(const BumpNetModel& model, std::span<const double> x) {
  require(model.include_heights(), "eval_model needs a model with heights; use eval_basis for trunks");
  const auto basis = eval_basis(model, x);
  double u = 0.0;
  for (std::size_t i = 0; i < basis.size(); ++i) u += model.height(i) * basis[i];
  return u;
}

}  // namespace bumpnet
