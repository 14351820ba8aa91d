#pragma once

// Fast evaluation kernel for training.
//
// A CompiledModel caches each bump's frame (p, B, s, sbar) once per optimizer
// step, optionally with the Jacobian of those frame quantities with respect to
// the bump's raw shape block. Per point, `forward` produces the model value
// with first/second derivatives along every axis and leaves per-bump
// intermediates in a cache; `backward` consumes adjoint seeds for those
// outputs and accumulates adjoints of the frame quantities and amplitudes.
// `chain_to_raw` pushes frame adjoints through the reparametrization.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bumpnet/dual.hpp"
#include "bumpnet/geometry.hpp"
#include "bumpnet/model.hpp"

namespace bumpnet {

/// Value, gradient and diagonal Hessian of a scalar field at one point.
/// Also used for adjoint seeds of those same quantities.
struct PointJet {
  double u = 0.0;
  std::array<double, kMaxDim> du{};
  std::array<double, kMaxDim> d2u{};
};

/// tanh through a single exp; agrees with std::tanh to a few ulp.
inline double fast_tanh(double x) {
  const double e = std::exp(-2.0 * std::abs(x));
  return std::copysign((1.0 - e) / (1.0 + e), x);
}

class CompiledModel {
 public:
  static constexpr std::size_t kTangentWidth = 3 * kMaxDim;
  static constexpr std::size_t kCacheStride = 5 * kMaxDim + 2;
  using Tan = Tangent<kTangentWidth>;

  struct Bump {
    double p = 1.0;
    double amp = 1.0;
    std::array<double, kMaxDim * kMaxDim> beta{};  // beta[j * kMaxDim + k]
    std::array<double, kMaxDim> s{};
    std::array<double, kMaxDim> sbar{};
  };

  CompiledModel() = default;

  explicit CompiledModel(const BumpNetModel& model, bool with_jacobian = false)
      : dim_(model.dim()), include_heights_(model.include_heights()), shape_size_(model.layout().shape_size()) {
    const std::size_t n = dim_;
    bumps_.resize(model.bump_count());
    if (with_jacobian) jacobian_.assign(bumps_.size() * frame_size() * shape_size_, 0.0);
    for (std::size_t i = 0; i < bumps_.size(); ++i) {
      const auto block = model.block(i);
      Bump& b = bumps_[i];
      b.amp = model.height(i);
      if (!with_jacobian) {
        const auto sh = model.shape(i);
        store(b, sh.frame, sh.sharpness);
        continue;
      }
      std::vector<Tan> lifted(shape_size_);
      for (std::size_t r = 0; r < shape_size_; ++r) lifted[r] = Tan::variable(block[r], r);
      const auto sh = shape_from_raw<Tan>(lifted, model.bbox());
      double* jac = jacobian_.data() + i * frame_size() * shape_size_;
      auto put = [&](std::size_t q, const Tan& v) {
        for (std::size_t r = 0; r < shape_size_; ++r) jac[q * shape_size_ + r] = v.d[r];
      };
      b.p = sh.sharpness.val;
      put(0, sh.sharpness);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
          b.beta[j * kMaxDim + k] = sh.frame.beta(j, k).val;
          put(1 + j * n + k, sh.frame.beta(j, k));
        }
        b.s[j] = sh.frame.s[j].val;
        b.sbar[j] = sh.frame.sbar[j].val;
        put(1 + n * n + j, sh.frame.s[j]);
        put(1 + n * n + n + j, sh.frame.sbar[j]);
      }
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t bump_count() const { return bumps_.size(); }
  bool include_heights() const { return include_heights_; }
  const std::vector<Bump>& bumps() const { return bumps_; }
  bool has_jacobian() const { return !jacobian_.empty(); }

  /// Frame quantities per bump: p, beta (n*n), s (n), sbar (n).
  std::size_t frame_size() const { return 1 + dim_ * dim_ + 2 * dim_; }
  std::size_t cache_size() const { return bumps_.size() * kCacheStride; }

  /// Model value and derivatives up to `Order` (0, 1 or 2) at x.
  /// Amplitudes default to the model heights (1 for height-free models).
  template <int Order>
  PointJet forward(const double* x, const double* amps, double* cache) const {
    switch (dim_) {
      case 1: return forward_n<Order, 1>(x, amps, cache);
      case 2: return forward_n<Order, 2>(x, amps, cache);
      case 3: return forward_n<Order, 3>(x, amps, cache);
      default: return forward_n<Order, 4>(x, amps, cache);
    }
  }

  /// Accumulates d(seed . outputs)/d(frame quantities) into frame_adj
  /// (bump-major, frame_size() each) and d/d(amplitude) into amp_adj.
  /// `cache` must come from forward<Order> at the same point.
  template <int Order>
  void backward(const double* x, const double* amps, const double* cache, const PointJet& seed, double* frame_adj,
                double* amp_adj) const {
    switch (dim_) {
      case 1: return backward_n<Order, 1>(x, amps, cache, seed, frame_adj, amp_adj);
      case 2: return backward_n<Order, 2>(x, amps, cache, seed, frame_adj, amp_adj);
      case 3: return backward_n<Order, 3>(x, amps, cache, seed, frame_adj, amp_adj);
      default: return backward_n<Order, 4>(x, amps, cache, seed, frame_adj, amp_adj);
    }
  }

 private:
  template <int Order, std::size_t N>
  PointJet forward_n(const double* x, const double* amps, double* cache) const {
    constexpr std::size_t n = N;
    const double offset = -(2.0 * static_cast<double>(n) - 1.0);
    PointJet out;
    for (std::size_t i = 0; i < bumps_.size(); ++i) {
      const Bump& b = bumps_[i];
      const double a = amps ? amps[i] : b.amp;
      double* c = cache + i * kCacheStride;
      double* t = c;
      double* tb = c + n;
      double* z = c + 2 * n;
      double sum = offset;
      for (std::size_t j = 0; j < n; ++j) {
        double zj = 0.0;
        for (std::size_t k = 0; k < n; ++k) zj += x[k] * b.beta[j * kMaxDim + k];
        z[j] = zj;
        t[j] = fast_tanh(b.p * (zj + b.s[j]));
        tb[j] = fast_tanh(b.p * (b.sbar[j] - zj));
        sum += t[j] + tb[j];
      }
      const double T = fast_tanh(b.p * sum);
      c[3 * n] = T;
      c[3 * n + 1] = sum;
      out.u += a * 0.5 * (1.0 + T);
      if constexpr (Order >= 1) {
        const double D = 1.0 - T * T;
        const double p2 = b.p * b.p;
        double* Q = c + 3 * n + 2;
        double* R = Q + n;
        for (std::size_t k = 0; k < n; ++k) {
          double q = 0.0;
          double r = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double bjk = b.beta[j * kMaxDim + k];
            const double d = 1.0 - t[j] * t[j];
            const double db = 1.0 - tb[j] * tb[j];
            q += bjk * (d - db);
            if constexpr (Order >= 2) r += bjk * bjk * (t[j] * d + tb[j] * db);
          }
          Q[k] = q;
          const double yk = p2 * q;
          out.du[k] += a * 0.5 * D * yk;
          if constexpr (Order >= 2) {
            R[k] = r;
            const double ykk = -2.0 * p2 * b.p * r;
            out.d2u[k] += a * 0.5 * D * (ykk - 2.0 * T * yk * yk);
          }
        }
      }
    }
    return out;
  }

  template <int Order, std::size_t N>
  void backward_n(const double* x, const double* amps, const double* cache, const PointJet& seed, double* frame_adj,
                  double* amp_adj) const {
    constexpr std::size_t n = N;
    const std::size_t fs = frame_size();
    for (std::size_t i = 0; i < bumps_.size(); ++i) {
      const Bump& b = bumps_[i];
      const double a = amps ? amps[i] : b.amp;
      const double* c = cache + i * kCacheStride;
      const double* t = c;
      const double* tb = c + n;
      const double* z = c + 2 * n;
      const double T = c[3 * n];
      const double S = c[3 * n + 1];
      const double D = 1.0 - T * T;
      const double p = b.p;
      const double p2 = p * p;

      double amp_g = seed.u * 0.5 * (1.0 + T);
      double adj_T = 0.5 * a * seed.u;
      double adj_D = 0.0;
      double adj_p = 0.0;
      std::array<double, kMaxDim> adj_Q{};
      std::array<double, kMaxDim> adj_R{};
      if constexpr (Order >= 1) {
        const double* Q = c + 3 * n + 2;
        const double* R = Q + n;
        for (std::size_t k = 0; k < n; ++k) {
          const double yk = p2 * Q[k];
          const double g1 = a * seed.du[k];
          amp_g += seed.du[k] * 0.5 * D * yk;
          adj_D += 0.5 * g1 * yk;
          double adj_yk = 0.5 * g1 * D;
          if constexpr (Order >= 2) {
            const double ykk = -2.0 * p2 * p * R[k];
            const double g2 = a * seed.d2u[k];
            amp_g += seed.d2u[k] * 0.5 * D * (ykk - 2.0 * T * yk * yk);
            adj_D += 0.5 * g2 * (ykk - 2.0 * T * yk * yk);
            adj_yk -= 2.0 * g2 * D * T * yk;
            adj_T -= g2 * D * yk * yk;
            const double adj_ykk = 0.5 * g2 * D;
            adj_p += -6.0 * p2 * R[k] * adj_ykk;
            adj_R[k] = -2.0 * p2 * p * adj_ykk;
          }
          adj_p += 2.0 * p * Q[k] * adj_yk;
          adj_Q[k] = p2 * adj_yk;
        }
      }
      if (amp_adj) amp_adj[i] += amp_g;

      adj_T += -2.0 * T * adj_D;
      const double adj_y = D * adj_T;
      adj_p += S * adj_y;
      const double adj_S = p * adj_y;

      double* fa = frame_adj + i * fs;
      double* fa_beta = fa + 1;
      double* fa_s = fa + 1 + n * n;
      double* fa_sbar = fa_s + n;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = 1.0 - t[j] * t[j];
        const double db = 1.0 - tb[j] * tb[j];
        double adj_t = adj_S;
        double adj_tb = adj_S;
        if constexpr (Order >= 1) {
          double adj_d = 0.0;
          double adj_db = 0.0;
          const double e = t[j] * d + tb[j] * db;
          for (std::size_t k = 0; k < n; ++k) {
            const double bjk = b.beta[j * kMaxDim + k];
            double g = adj_Q[k] * (d - db);
            adj_d += adj_Q[k] * bjk;
            adj_db -= adj_Q[k] * bjk;
            if constexpr (Order >= 2) {
              const double b2 = bjk * bjk;
              g += adj_R[k] * 2.0 * bjk * e;
              adj_d += adj_R[k] * b2 * t[j];
              adj_db += adj_R[k] * b2 * tb[j];
              adj_t += adj_R[k] * b2 * d;
              adj_tb += adj_R[k] * b2 * db;
            }
            fa_beta[j * n + k] += g;
          }
          adj_t += -2.0 * t[j] * adj_d;
          adj_tb += -2.0 * tb[j] * adj_db;
        }
        const double adj_A = d * adj_t;
        const double adj_Ab = db * adj_tb;
        adj_p += (z[j] + b.s[j]) * adj_A + (b.sbar[j] - z[j]) * adj_Ab;
        fa_s[j] += p * adj_A;
        fa_sbar[j] += p * adj_Ab;
        const double adj_z = p * (adj_A - adj_Ab);
        for (std::size_t k = 0; k < n; ++k) fa_beta[j * n + k] += x[k] * adj_z;
      }
      fa[0] += adj_p;
    }
  }

 public:

  PointJet forward(int order, const double* x, const double* amps, double* cache) const {
    switch (order) {
      case 0: return forward<0>(x, amps, cache);
      case 1: return forward<1>(x, amps, cache);
      default: return forward<2>(x, amps, cache);
    }
  }

  void backward(int order, const double* x, const double* amps, const double* cache, const PointJet& seed,
                double* frame_adj, double* amp_adj) const {
    switch (order) {
      case 0: backward<0>(x, amps, cache, seed, frame_adj, amp_adj); break;
      case 1: backward<1>(x, amps, cache, seed, frame_adj, amp_adj); break;
      default: backward<2>(x, amps, cache, seed, frame_adj, amp_adj); break;
    }
  }

  /// Raw-parameter gradient from accumulated adjoints. For models with
  /// heights, amp_adj holds d/dh and is written into the height slots.
  void chain_to_raw(std::span<const double> frame_adj, std::span<const double> amp_adj,
                    std::span<double> raw_grad) const {
    const std::size_t fs = frame_size();
    const std::size_t per = shape_size_ + (include_heights_ ? 1 : 0);
    for (std::size_t i = 0; i < bumps_.size(); ++i) {
      const double* jac = jacobian_.data() + i * fs * shape_size_;
      const double* fa = frame_adj.data() + i * fs;
      double* g = raw_grad.data() + i * per;
      for (std::size_t q = 0; q < fs; ++q) {
        const double w = fa[q];
        if (w == 0.0) continue;
        for (std::size_t r = 0; r < shape_size_; ++r) g[r] += w * jac[q * shape_size_ + r];
      }
      if (include_heights_ && !amp_adj.empty()) g[shape_size_] += amp_adj[i];
    }
  }

  double value(std::span<const double> x, std::vector<double>& cache) const {
    cache.resize(cache_size());
    return forward<0>(x.data(), nullptr, cache.data()).u;
  }

  void basis(std::span<const double> x, std::span<double> out) const {
    const std::size_t n = dim_;
    const double offset = -(2.0 * static_cast<double>(n) - 1.0);
    for (std::size_t i = 0; i < bumps_.size(); ++i) {
      const Bump& b = bumps_[i];
      double sum = offset;
      for (std::size_t j = 0; j < n; ++j) {
        double zj = 0.0;
        for (std::size_t k = 0; k < n; ++k) zj += x[k] * b.beta[j * kMaxDim + k];
        sum += fast_tanh(b.p * (zj + b.s[j])) + fast_tanh(b.p * (b.sbar[j] - zj));
      }
      out[i] = 0.5 * (1.0 + fast_tanh(b.p * sum));
    }
  }

 private:
  static void store(Bump& b, const HalfSpaceFrame& f, double p) {
    b.p = p;
    for (std::size_t j = 0; j < f.dim; ++j) {
      for (std::size_t k = 0; k < f.dim; ++k) b.beta[j * kMaxDim + k] = f.beta(j, k);
      b.s[j] = f.s[j];
      b.sbar[j] = f.sbar[j];
    }
  }

  std::size_t dim_ = 0;
  bool include_heights_ = true;
  std::size_t shape_size_ = 0;
  std::vector<Bump> bumps_;
  std::vector<double> jacobian_;  // bump-major, frame_size() x shape_size_ each
};

}  // namespace bumpnet
