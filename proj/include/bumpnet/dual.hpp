#pragma once

// Forward-mode differentiation types.
//
//   Tangent<K>  value plus a K-wide gradient (first order, used for
//               parameter sensitivities).
//   Jet2<T, N>  value plus first and second derivatives along N independent
//               axes (no mixed terms). Jet2<T, 1> is the classic second-order
//               dual number and is exported as Dual2<T>.
//
// Both compose: Jet2<Tangent<K>, N> carries parameter sensitivities of
// spatial derivatives.

#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>

namespace bumpnet {

template <std::size_t K>
struct Tangent {
  double val = 0.0;
  std::array<double, K> d{};

  constexpr Tangent() = default;
  constexpr Tangent(double v) : val(v) {}  // NOLINT: implicit lift of constants

  static constexpr Tangent variable(double v, std::size_t slot) {
    Tangent t(v);
    t.d[slot] = 1.0;
    return t;
  }
};

template <class>
struct is_tangent : std::false_type {};
template <std::size_t K>
struct is_tangent<Tangent<K>> : std::true_type {};

// Chain rule for a unary function with value f and derivative df.
template <std::size_t K>
constexpr Tangent<K> chain(const Tangent<K>& x, double f, double df) {
  Tangent<K> r(f);
  for (std::size_t i = 0; i < K; ++i) r.d[i] = df * x.d[i];
  return r;
}

template <std::size_t K>
constexpr Tangent<K> operator-(const Tangent<K>& a) {
  Tangent<K> r(-a.val);
  for (std::size_t i = 0; i < K; ++i) r.d[i] = -a.d[i];
  return r;
}

template <std::size_t K>
constexpr Tangent<K> operator+(const Tangent<K>& a, const Tangent<K>& b) {
  Tangent<K> r(a.val + b.val);
  for (std::size_t i = 0; i < K; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}

template <std::size_t K>
constexpr Tangent<K> operator-(const Tangent<K>& a, const Tangent<K>& b) {
  Tangent<K> r(a.val - b.val);
  for (std::size_t i = 0; i < K; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}

template <std::size_t K>
constexpr Tangent<K> operator*(const Tangent<K>& a, const Tangent<K>& b) {
  Tangent<K> r(a.val * b.val);
  for (std::size_t i = 0; i < K; ++i) r.d[i] = a.d[i] * b.val + a.val * b.d[i];
  return r;
}

template <std::size_t K>
constexpr Tangent<K> operator/(const Tangent<K>& a, const Tangent<K>& b) {
  const double inv = 1.0 / b.val;
  Tangent<K> r(a.val * inv);
  for (std::size_t i = 0; i < K; ++i) r.d[i] = (a.d[i] - r.val * b.d[i]) * inv;
  return r;
}

template <std::size_t K>
constexpr Tangent<K> operator+(const Tangent<K>& a, double b) { return a + Tangent<K>(b); }
template <std::size_t K>
constexpr Tangent<K> operator+(double a, const Tangent<K>& b) { return Tangent<K>(a) + b; }
template <std::size_t K>
constexpr Tangent<K> operator-(const Tangent<K>& a, double b) { return a - Tangent<K>(b); }
template <std::size_t K>
constexpr Tangent<K> operator-(double a, const Tangent<K>& b) { return Tangent<K>(a) - b; }
template <std::size_t K>
constexpr Tangent<K> operator*(const Tangent<K>& a, double b) {
  Tangent<K> r(a.val * b);
  for (std::size_t i = 0; i < K; ++i) r.d[i] = a.d[i] * b;
  return r;
}
template <std::size_t K>
constexpr Tangent<K> operator*(double a, const Tangent<K>& b) { return b * a; }
template <std::size_t K>
constexpr Tangent<K> operator/(const Tangent<K>& a, double b) { return a * (1.0 / b); }
template <std::size_t K>
constexpr Tangent<K> operator/(double a, const Tangent<K>& b) { return Tangent<K>(a) / b; }

template <std::size_t K>
constexpr Tangent<K>& operator+=(Tangent<K>& a, const Tangent<K>& b) { return a = a + b; }
template <std::size_t K>
constexpr Tangent<K>& operator-=(Tangent<K>& a, const Tangent<K>& b) { return a = a - b; }
template <std::size_t K>
constexpr Tangent<K>& operator*=(Tangent<K>& a, const Tangent<K>& b) { return a = a * b; }

template <std::size_t K>
inline Tangent<K> tanh(const Tangent<K>& x) {
  const double t = std::tanh(x.val);
  return chain(x, t, 1.0 - t * t);
}
template <std::size_t K>
inline Tangent<K> exp(const Tangent<K>& x) {
  const double e = std::exp(x.val);
  return chain(x, e, e);
}
template <std::size_t K>
inline Tangent<K> log(const Tangent<K>& x) {
  return chain(x, std::log(x.val), 1.0 / x.val);
}
template <std::size_t K>
inline Tangent<K> sqrt(const Tangent<K>& x) {
  const double s = std::sqrt(x.val);
  return chain(x, s, 0.5 / s);
}
template <std::size_t K>
inline Tangent<K> sin(const Tangent<K>& x) {
  return chain(x, std::sin(x.val), std::cos(x.val));
}
template <std::size_t K>
inline Tangent<K> cos(const Tangent<K>& x) {
  return chain(x, std::cos(x.val), -std::sin(x.val));
}

// ---------------------------------------------------------------------------

template <class T, std::size_t N>
struct Jet2 {
  T val{};
  std::array<T, N> d1{};
  std::array<T, N> d2{};

  constexpr Jet2() = default;
  constexpr Jet2(const T& v) : val(v) {}  // NOLINT: implicit lift of constants

  /// Independent variable along `axis`: first derivative 1, second 0.
  static constexpr Jet2 variable(const T& v, std::size_t axis) {
    Jet2 j(v);
    j.d1[axis] = T(1.0);
    return j;
  }
};

template <class T>
using Dual2 = Jet2<T, 1>;

template <class>
struct is_jet2 : std::false_type {};
template <class T, std::size_t N>
struct is_jet2<Jet2<T, N>> : std::true_type {};

/// Unary chain rule: (f o x)' = f' x', (f o x)'' = f' x'' + f'' x'^2.
template <class T, std::size_t N>
constexpr Jet2<T, N> chain(const Jet2<T, N>& x, const T& f, const T& df, const T& d2f) {
  Jet2<T, N> r(f);
  for (std::size_t k = 0; k < N; ++k) {
    r.d1[k] = df * x.d1[k];
    r.d2[k] = df * x.d2[k] + d2f * x.d1[k] * x.d1[k];
  }
  return r;
}

template <class T, std::size_t N>
constexpr Jet2<T, N> operator-(const Jet2<T, N>& a) {
  Jet2<T, N> r(-a.val);
  for (std::size_t k = 0; k < N; ++k) {
    r.d1[k] = -a.d1[k];
    r.d2[k] = -a.d2[k];
  }
  return r;
}

template <class T, std::size_t N>
constexpr Jet2<T, N> operator+(const Jet2<T, N>& a, const Jet2<T, N>& b) {
  Jet2<T, N> r(a.val + b.val);
  for (std::size_t k = 0; k < N; ++k) {
    r.d1[k] = a.d1[k] + b.d1[k];
    r.d2[k] = a.d2[k] + b.d2[k];
  }
  return r;
}

template <class T, std::size_t N>
constexpr Jet2<T, N> operator-(const Jet2<T, N>& a, const Jet2<T, N>& b) {
  return a + (-b);
}

template <class T, std::size_t N>
constexpr Jet2<T, N> operator*(const Jet2<T, N>& a, const Jet2<T, N>& b) {
  Jet2<T, N> r(a.val * b.val);
  for (std::size_t k = 0; k < N; ++k) {
    r.d1[k] = a.d1[k] * b.val + a.val * b.d1[k];
    r.d2[k] = a.d2[k] * b.val + T(2.0) * a.d1[k] * b.d1[k] + a.val * b.d2[k];
  }
  return r;
}

template <class T, std::size_t N>
constexpr Jet2<T, N> reciprocal(const Jet2<T, N>& x) {
  const T inv = T(1.0) / x.val;
  const T inv2 = inv * inv;
  return chain(x, inv, -inv2, T(2.0) * inv2 * inv);
}

template <class T, std::size_t N>
constexpr Jet2<T, N> operator/(const Jet2<T, N>& a, const Jet2<T, N>& b) {
  return a * reciprocal(b);
}

// Mixed operations with the underlying scalar type.
template <class T, std::size_t N>
constexpr Jet2<T, N> operator*(const Jet2<T, N>& a, const T& b) {
  Jet2<T, N> r(a.val * b);
  for (std::size_t k = 0; k < N; ++k) {
    r.d1[k] = a.d1[k] * b;
    r.d2[k] = a.d2[k] * b;
  }
  return r;
}
template <class T, std::size_t N>
constexpr Jet2<T, N> operator*(const T& a, const Jet2<T, N>& b) { return b * a; }
template <class T, std::size_t N>
constexpr Jet2<T, N> operator+(const Jet2<T, N>& a, const T& b) {
  Jet2<T, N> r = a;
  r.val = a.val + b;
  return r;
}
template <class T, std::size_t N>
constexpr Jet2<T, N> operator+(const T& a, const Jet2<T, N>& b) { return b + a; }
template <class T, std::size_t N>
constexpr Jet2<T, N> operator-(const Jet2<T, N>& a, const T& b) { return a + (-b); }
template <class T, std::size_t N>
constexpr Jet2<T, N> operator-(const T& a, const Jet2<T, N>& b) { return (-b) + a; }
template <class T, std::size_t N>
constexpr Jet2<T, N> operator/(const Jet2<T, N>& a, const T& b) { return a * (T(1.0) / b); }
template <class T, std::size_t N>
constexpr Jet2<T, N> operator/(const T& a, const Jet2<T, N>& b) { return reciprocal(b) * a; }

// Plain double literals when the inner type is not itself double.
template <class T, std::size_t N>
  requires(!std::is_same_v<T, double>)
constexpr Jet2<T, N> operator*(const Jet2<T, N>& a, double b) { return a * T(b); }
template <class T, std::size_t N>
  requires(!std::is_same_v<T, double>)
constexpr Jet2<T, N> operator*(double a, const Jet2<T, N>& b) { return b * T(a); }
template <class T, std::size_t N>
  requires(!std::is_same_v<T, double>)
constexpr Jet2<T, N> operator+(const Jet2<T, N>& a, double b) { return a + T(b); }
template <class T, std::size_t N>
  requires(!std::is_same_v<T, double>)
constexpr Jet2<T, N> operator+(double a, const Jet2<T, N>& b) { return b + T(a); }
template <class T, std::size_t N>
  requires(!std::is_same_v<T, double>)
constexpr Jet2<T, N> operator-(const Jet2<T, N>& a, double b) { return a - T(b); }
template <class T, std::size_t N>
  requires(!std::is_same_v<T, double>)
constexpr Jet2<T, N> operator-(double a, const Jet2<T, N>& b) { return T(a) - b; }
template <class T, std::size_t N>
  requires(!std::is_same_v<T, double>)
constexpr Jet2<T, N> operator/(const Jet2<T, N>& a, double b) { return a / T(b); }

template <class T, std::size_t N>
constexpr Jet2<T, N>& operator+=(Jet2<T, N>& a, const Jet2<T, N>& b) { return a = a + b; }
template <class T, std::size_t N>
constexpr Jet2<T, N>& operator-=(Jet2<T, N>& a, const Jet2<T, N>& b) { return a = a - b; }
template <class T, std::size_t N>
constexpr Jet2<T, N>& operator*=(Jet2<T, N>& a, const Jet2<T, N>& b) { return a = a * b; }

template <class T, std::size_t N>
inline Jet2<T, N> tanh(const Jet2<T, N>& x) {
  using std::tanh;
  const T t = tanh(x.val);
  const T dt = T(1.0) - t * t;
  return chain(x, t, dt, T(-2.0) * t * dt);
}
template <class T, std::size_t N>
inline Jet2<T, N> exp(const Jet2<T, N>& x) {
  using std::exp;
  const T e = exp(x.val);
  return chain(x, e, e, e);
}
template <class T, std::size_t N>
inline Jet2<T, N> sin(const Jet2<T, N>& x) {
  using std::cos;
  using std::sin;
  const T s = sin(x.val);
  return chain(x, s, cos(x.val), -s);
}
template <class T, std::size_t N>
inline Jet2<T, N> cos(const Jet2<T, N>& x) {
  using std::cos;
  using std::sin;
  const T c = cos(x.val);
  return chain(x, c, -sin(x.val), -c);
}
template <class T, std::size_t N>
inline Jet2<T, N> sqrt(const Jet2<T, N>& x) {
  using std::sqrt;
  const T s = sqrt(x.val);
  const T ds = T(0.5) / s;
  return chain(x, s, ds, -ds / (T(2.0) * x.val));
}

// Primal value of a possibly nested differentiation type.
inline constexpr double primal(double x) { return x; }
template <std::size_t K>
constexpr double primal(const Tangent<K>& x) { return x.val; }
template <class T, std::size_t N>
constexpr double primal(const Jet2<T, N>& x) { return primal(x.val); }

}  // namespace bumpnet
