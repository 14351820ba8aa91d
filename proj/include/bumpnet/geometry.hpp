#pragma once

// Bump geometry: the orthogonal half-space frame of a bump and the
// conversions between interpretable geometry (center, side lengths) and
// the first-layer biases of its 2n tied neurons.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bumpnet/dual.hpp"
#include "bumpnet/error.hpp"

namespace bumpnet {

/// Largest spatial dimension supported by the fixed-size evaluation kernels.
inline constexpr std::size_t kMaxDim = 4;

/// Axis-aligned box (x_{jl}, x_{jr}) around the domain.
struct BoundingBox {
  std::vector<double> lower;
  std::vector<double> upper;

  BoundingBox() = default;
  BoundingBox(std::vector<double> lo, std::vector<double> hi) : lower(std::move(lo)), upper(std::move(hi)) {
    validate();
  }

  /// Same interval [lo, hi] along every one of `dim` axes.
  static BoundingBox cube(std::size_t dim, double lo, double hi) {
    return {std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
  }

  std::size_t dim() const { return lower.size(); }
  double extent(std::size_t j) const { return upper[j] - lower[j]; }

  bool contains_strictly(std::span<const double> x) const {
    for (std::size_t j = 0; j < dim(); ++j)
      if (!(x[j] > lower[j] && x[j] < upper[j])) return false;
    return true;
  }

  void validate() const {
    require(!lower.empty(), "bounding box must have at least one dimension");
    require(lower.size() == upper.size(), "bounding box bounds differ in length");
    require(lower.size() <= kMaxDim, "dimension exceeds kMaxDim = " + std::to_string(kMaxDim));
    for (std::size_t j = 0; j < lower.size(); ++j)
      require(lower[j] < upper[j], "bounding box axis " + std::to_string(j) + " has lower >= upper");
  }

  bool operator==(const BoundingBox&) const = default;
};

/// Interpretable description of one bump.
struct BumpGeometry {
  std::vector<double> center;
  std::vector<double> sides;     // strictly positive
  std::vector<double> rotation;  // n-1 coefficients a_1..a_{n-1}
  double sharpness = 1.0;        // p > 0
  double height = 1.0;

  std::size_t dim() const { return center.size(); }
};

/// Direction matrix B (columns beta_1..beta_n, column-major) with the paired
/// biases s, sbar. Templated so parameter sensitivities can flow through it.
template <class S>
struct BasicFrame {
  std::size_t dim = 0;
  std::vector<S> directions;  // directions[j * dim + k] = k-th component of beta_j
  std::vector<S> s;
  std::vector<S> sbar;

  const S& beta(std::size_t j, std::size_t k) const { return directions[j * dim + k]; }
};

using HalfSpaceFrame = BasicFrame<double>;

/// Gram-Schmidt on [beta_1, e_2, ..., e_n] with beta_1 = [1, a_1, ..., a_{n-1}].
///
/// Columns are orthogonal but not normalized. Column j is the classical
/// Gram-Schmidt residual scaled by the product of the squared norms of the
/// preceding residuals (fraction-free form), which clears all denominators:
/// n=2 gives beta_2 = [-a, 1]; n=3 gives beta_2 = [-a1, a2^2+1, -a1 a2] and
/// beta_3 = [-a2, 0, 1].
template <class S>
std::vector<S> gram_schmidt_frame(std::span<const S> rotation) {
  const std::size_t n = rotation.size() + 1;
  std::vector<S> u(n * n, S(0.0));
  std::vector<S> norm2(n, S(0.0));
  u[0] = S(1.0);
  for (std::size_t k = 1; k < n; ++k) u[k] = rotation[k - 1];

  for (std::size_t j = 0; j < n; ++j) {
    S* col = u.data() + j * n;
    if (j > 0) {
      col[j] = S(1.0);
      for (std::size_t i = 0; i < j; ++i) {
        const S* prev = u.data() + i * n;
        S dot(0.0);
        for (std::size_t k = 0; k < n; ++k) dot = dot + col[k] * prev[k];
        const S coef = dot / norm2[i];
        for (std::size_t k = 0; k < n; ++k) col[k] = col[k] - coef * prev[k];
      }
    }
    S nn(0.0);
    for (std::size_t k = 0; k < n; ++k) nn = nn + col[k] * col[k];
    norm2[j] = nn;
  }

  std::vector<S> b(n * n, S(0.0));
  S scale(1.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) b[j * n + k] = scale * u[j * n + k];
    scale = scale * norm2[j];
  }
  return b;
}

inline std::vector<double> gram_schmidt_frame(const std::vector<double>& rotation) {
  return gram_schmidt_frame<double>(std::span<const double>(rotation));
}

/// Biases from center and side lengths: B^T c = (sbar - s)/2 and
/// s_j + sbar_j = l_j |beta_j|.
template <class S>
void geometry_to_biases(std::span<const S> center, std::span<const S> sides, BasicFrame<S>& frame) {
  const std::size_t n = frame.dim;
  frame.s.assign(n, S(0.0));
  frame.sbar.assign(n, S(0.0));
  using std::sqrt;
  for (std::size_t j = 0; j < n; ++j) {
    S nn(0.0);
    S cb(0.0);
    for (std::size_t k = 0; k < n; ++k) {
      nn = nn + frame.beta(j, k) * frame.beta(j, k);
      cb = cb + center[k] * frame.beta(j, k);
    }
    const S half_width = S(0.5) * sides[j] * sqrt(nn);
    frame.s[j] = half_width - cb;
    frame.sbar[j] = half_width + cb;
  }
}

inline HalfSpaceFrame geometry_to_biases(const BumpGeometry& g) {
  const std::size_t n = g.dim();
  require(g.sides.size() == n && g.rotation.size() + 1 == n, "geometry fields disagree in dimension");
  for (double l : g.sides) require(l > 0.0, "bump sides must be strictly positive");
  HalfSpaceFrame f;
  f.dim = n;
  f.directions = gram_schmidt_frame(g.rotation);
  geometry_to_biases<double>(g.center, g.sides, f);
  return f;
}

struct SidesAndCenter {
  std::vector<double> sides;
  std::vector<double> center;
};

/// Inverse of geometry_to_biases using column orthogonality of B.
inline SidesAndCenter biases_to_geometry(const HalfSpaceFrame& f) {
  const std::size_t n = f.dim;
  require(f.s.size() == n && f.sbar.size() == n && f.directions.size() == n * n, "frame is malformed");
  SidesAndCenter out{std::vector<double>(n), std::vector<double>(n, 0.0)};
  for (std::size_t j = 0; j < n; ++j) {
    const double width = f.s[j] + f.sbar[j];
    if (!(width > 0.0))
      throw ValidationError("degenerate support: s + sbar <= 0 along direction " + std::to_string(j));
    double nn = 0.0;
    for (std::size_t k = 0; k < n; ++k) nn += f.beta(j, k) * f.beta(j, k);
    out.sides[j] = width / std::sqrt(nn);
    const double w = (f.sbar[j] - f.s[j]) / (2.0 * nn);
    for (std::size_t k = 0; k < n; ++k) out.center[k] += f.beta(j, k) * w;
  }
  return out;
}

}  // namespace bumpnet
