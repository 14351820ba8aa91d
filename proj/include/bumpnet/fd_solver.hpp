#pragma once

// Finite-difference solver for u_t = D u_xx + k u^2 + f(x) on [0,1] x [0,T]
// with zero initial and boundary values. Central differences in space,
// Crank-Nicolson diffusion with an Adams-Bashforth reaction term.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bumpnet/error.hpp"

namespace bumpnet {

struct ReactionDiffusion {
  double diffusion = 0.01;
  double reaction = 0.01;
  double end_time = 1.0;
};

struct FdGrid {
  std::size_t nx = 200;  // intervals in x
  std::size_t nt = 200;  // time steps
};

struct FdSolution {
  FdGrid grid;
  double end_time = 1.0;
  std::vector<double> values;  // (nt + 1) rows of (nx + 1) nodes

  double x(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(grid.nx); }
  double t(std::size_t n) const { return end_time * static_cast<double>(n) / static_cast<double>(grid.nt); }
  double at(std::size_t i, std::size_t n) const { return values[n * (grid.nx + 1) + i]; }

  /// Bilinear interpolation between nodes.
  double interpolate(double xq, double tq) const {
    require(xq >= 0.0 && xq <= 1.0 && tq >= 0.0 && tq <= end_time, "interpolation point outside the FD grid");
    const double fx = xq * static_cast<double>(grid.nx), ft = tq / end_time * static_cast<double>(grid.nt);
    const std::size_t i = std::min(static_cast<std::size_t>(fx), grid.nx - 1);
    const std::size_t n = std::min(static_cast<std::size_t>(ft), grid.nt - 1);
    const double a = fx - static_cast<double>(i), b = ft - static_cast<double>(n);
    return (1 - a) * (1 - b) * at(i, n) + a * (1 - b) * at(i + 1, n) + (1 - a) * b * at(i, n + 1) +
           a * b * at(i + 1, n + 1);
  }
};

/// Piecewise-linear interpolant of values on equispaced sensors over [0, 1].
inline std::function<double(double)> sensor_interpolant(std::span<const double> sensors) {
  require(sensors.size() >= 2, "need at least 2 sensor values");
  std::vector<double> v(sensors.begin(), sensors.end());
  return [v = std::move(v)](double x) {
    const double s = std::clamp(x, 0.0, 1.0) * static_cast<double>(v.size() - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(s), v.size() - 2);
    const double a = s - static_cast<double>(i);
    return (1 - a) * v[i] + a * v[i + 1];
  };
}

inline FdSolution fd_solve_rd(const std::function<double(double)>& f, const FdGrid& grid,
                              const ReactionDiffusion& pde = {}, double blowup = 1e6) {
  require(grid.nx >= 2 && grid.nt >= 1, "FD grid needs nx >= 2 and nt >= 1");
  require(pde.diffusion >= 0.0 && pde.end_time > 0.0, "FD solver needs D >= 0 and T > 0");
  const std::size_t nx = grid.nx, m = nx - 1;  // interior unknowns
  const double h = 1.0 / static_cast<double>(nx);
  const double dt = pde.end_time / static_cast<double>(grid.nt);
  const double r = 0.5 * dt * pde.diffusion / (h * h);

  FdSolution sol{grid, pde.end_time, std::vector<double>((grid.nt + 1) * (nx + 1), 0.0)};
  std::vector<double> fx(m), u(m, 0.0), react_prev(m, 0.0), rhs(m);
  for (std::size_t i = 0; i < m; ++i) fx[i] = f(static_cast<double>(i + 1) * h);

  // Thomas factorization of the constant matrix tridiag(-r, 1 + 2r, -r).
  std::vector<double> cp(m), inv(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double denom = (1 + 2 * r) - (i ? -r * cp[i - 1] : 0.0);
    inv[i] = 1.0 / denom;
    cp[i] = -r * inv[i];
  }

  for (std::size_t n = 0; n < grid.nt; ++n) {
    for (std::size_t i = 0; i < m; ++i) {
      const double left = i ? u[i - 1] : 0.0, right = i + 1 < m ? u[i + 1] : 0.0;
      const double react = pde.reaction * u[i] * u[i];
      const double extrap = n ? 1.5 * react - 0.5 * react_prev[i] : react;
      react_prev[i] = react;
      rhs[i] = u[i] + r * (left - 2 * u[i] + right) + dt * (extrap + fx[i]);
    }
    for (std::size_t i = 0; i < m; ++i) rhs[i] = (rhs[i] + (i ? r * rhs[i - 1] : 0.0)) * inv[i];
    for (std::size_t i = m; i-- > 0;) u[i] = rhs[i] - (i + 1 < m ? cp[i] * u[i + 1] : 0.0);

    double* row = sol.values.data() + (n + 1) * (nx + 1);
    for (std::size_t i = 0; i < m; ++i) {
      if (!std::isfinite(u[i]) || std::abs(u[i]) > blowup)
        throw NumericalError("FD solution blew up at t = " + std::to_string(sol.t(n + 1)));
      row[i + 1] = u[i];
    }
  }
  return sol;
}

inline FdSolution fd_solve_rd(std::span<const double> sensors, const FdGrid& grid, const ReactionDiffusion& pde = {}) {
  return fd_solve_rd(sensor_interpolant(sensors), grid, pde);
}

}  // namespace bumpnet
