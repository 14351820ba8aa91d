#pragma once

// Height-only time evolution of a BumpNet (EDNN).
//
// After fitting the initial condition, bump shapes are frozen and only the
// heights h(t) evolve. The field is u(x,t) = D(x) * sum_i h_i(t) psi_i(x) with
// a distance factor D vanishing on the box boundary, so zero Dirichlet data
// holds by construction. At each stage dh/dt is the least-squares solution of
// J gamma = N[u] on a fixed collocation grid, J_ki = D(x_k) psi_i(x_k).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "bumpnet/compiled.hpp"
#include "bumpnet/error.hpp"
#include "bumpnet/metrics.hpp"
#include "bumpnet/model.hpp"
#include "bumpnet/optim.hpp"

namespace bumpnet {

/// D(x) = prod_j sin(pi (x_j - lo_j) / (hi_j - lo_j)) with derivatives along each axis.
struct SineDistance {
  BoundingBox box;

  struct Value {
    double d = 0.0;
    std::array<double, kMaxDim> d1{};
    std::array<double, kMaxDim> d2{};
  };

  Value operator()(const double* x) const {
    const std::size_t n = box.dim();
    std::array<double, kMaxDim> s{}, c{}, w{};
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = std::numbers::pi / box.extent(j);
      const double arg = w[j] * (x[j] - box.lower[j]);
      s[j] = std::sin(arg);
      c[j] = std::cos(arg);
    }
    Value v;
    v.d = 1.0;
    for (std::size_t j = 0; j < n; ++j) v.d *= s[j];
    for (std::size_t k = 0; k < n; ++k) {
      double rest = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != k) rest *= s[j];
      v.d1[k] = w[k] * c[k] * rest;
      v.d2[k] = -w[k] * w[k] * s[k] * rest;
    }
    return v;
  }
};

/// Frozen basis on a collocation set: J (values of D psi_i) and L (Laplacian of D psi_i).
class FrozenBasis {
 public:
  FrozenBasis(const BumpNetModel& model, const SineDistance& dist, std::vector<double> points)
      : dim_(model.dim()), points_(std::move(points)) {
    const std::size_t n = dim_;
    const std::size_t count = points_.size() / n;
    const std::size_t m = model.bump_count();
    require(count >= m, "EDNN needs at least as many collocation points as evolving heights");
    const CompiledModel cm(model);
    std::vector<double> cache(cm.cache_size()), amps(m, 0.0);
    J_.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(m));
    L_.resizeLike(J_);
    for (std::size_t k = 0; k < count; ++k) {
      const double* x = points_.data() + k * n;
      const auto D = dist(x);
      for (std::size_t i = 0; i < m; ++i) {
        amps[i] = 1.0;
        const PointJet psi = cm.forward<2>(x, amps.data(), cache.data());
        amps[i] = 0.0;
        double lap = 0.0;
        for (std::size_t a = 0; a < n; ++a) lap += D.d2[a] * psi.u + 2.0 * D.d1[a] * psi.du[a] + D.d * psi.d2u[a];
        J_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = D.d * psi.u;
        L_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = lap;
      }
    }
    qr_.compute(J_);
    if (qr_.rank() < static_cast<Eigen::Index>(m)) throw NumericalError(rank_message());
  }

  const Eigen::MatrixXd& values() const { return J_; }
  const Eigen::MatrixXd& laplacians() const { return L_; }
  std::size_t point_count() const { return static_cast<std::size_t>(J_.rows()); }

  /// Least-squares solution of J gamma = r.
  Eigen::VectorXd solve(const Eigen::VectorXd& r) const { return qr_.solve(r); }

  /// ||J^T (J gamma - r)|| / ||J^T r||, zero when r = 0.
  double certificate(const Eigen::VectorXd& gamma, const Eigen::VectorXd& r) const {
    const double den = (J_.transpose() * r).norm();
    const double num = (J_.transpose() * (J_ * gamma - r)).norm();
    return den == 0.0 ? num : num / den;
  }

 private:
  std::string rank_message() const {
    // Name the most nearly parallel pair of columns.
    const Eigen::Index m = J_.cols();
    double best = -1.0;
    Eigen::Index bi = 0, bj = 1;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < m; ++j) {
        const double den = J_.col(i).norm() * J_.col(j).norm();
        const double cosine = den > 0 ? std::abs(J_.col(i).dot(J_.col(j))) / den : 1.0;
        if (cosine > best) {
          best = cosine;
          bi = i;
          bj = j;
        }
      }
    return "EDNN least-squares system is rank deficient; bumps " + std::to_string(bi) + " and " +
           std::to_string(bj) + " are nearly identical on the collocation grid";
  }

  std::size_t dim_;
  std::vector<double> points_;
  Eigen::MatrixXd J_;
  Eigen::MatrixXd L_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

/// Cell-centred tensor grid with `per_axis[j]` points along axis j (axis 0 fastest).
inline std::vector<double> cell_centred_grid(const BoundingBox& box, const std::vector<std::size_t>& per_axis) {
  const std::size_t n = box.dim();
  require(per_axis.size() == n, "grid needs one count per axis");
  std::size_t total = 1;
  for (std::size_t c : per_axis) total *= c;
  std::vector<double> pts(total * n);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t r = i;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = r % per_axis[j];
      r /= per_axis[j];
      pts[i * n + j] = box.lower[j] + box.extent(j) * (static_cast<double>(k) + 0.5) / static_cast<double>(per_axis[j]);
    }
  }
  return pts;
}

/// One Shu-Osher SSP-RK3 step of y' = f(y).
template <class Rhs>
Eigen::VectorXd rk3_step(const Eigen::VectorXd& y, double dt, Rhs&& f) {
  require(dt > 0.0, "time step must be positive");
  const Eigen::VectorXd y1 = y + dt * f(y);
  const Eigen::VectorXd y2 = 0.75 * y + 0.25 * (y1 + dt * f(y1));
  Eigen::VectorXd out = y / 3.0 + 2.0 / 3.0 * (y2 + dt * f(y2));
  if (!out.allFinite()) throw NumericalError("non-finite Runge-Kutta stage");
  return out;
}

/// Heat equation u_t = nu * Laplacian(u) on the frozen basis.
class HeatEvolution {
 public:
  HeatEvolution(const FrozenBasis& basis, double nu, double tolerance = 1e-4)
      : basis_(basis), nu_(nu), tolerance_(tolerance) {}

  /// dh/dt. Throws if the least-squares certificate exceeds the tolerance.
  Eigen::VectorXd rhs(const Eigen::VectorXd& h) const {
    const Eigen::VectorXd r = nu_ * (basis_.laplacians() * h);
    const Eigen::VectorXd gamma = basis_.solve(r);
    last_certificate_ = basis_.certificate(gamma, r);
    worst_certificate_ = std::max(worst_certificate_, last_certificate_);
    if (!(last_certificate_ <= tolerance_))
      throw NumericalError("EDNN least-squares certificate " + std::to_string(last_certificate_) +
                           " exceeds tolerance");
    return gamma;
  }

  Eigen::VectorXd step(const Eigen::VectorXd& h, double dt) const {
    return rk3_step(h, dt, [&](const Eigen::VectorXd& y) { return rhs(y); });
  }

  double worst_certificate() const { return worst_certificate_; }

 private:
  const FrozenBasis& basis_;
  double nu_;
  double tolerance_;
  mutable double last_certificate_ = 0.0;
  mutable double worst_certificate_ = 0.0;
};

// ---------------------------------------------------------------------------
// Heat benchmark on [-pi, pi]^2 with u(x,y,0) = sin x sin y.

struct EdnnConfig {
  std::vector<std::size_t> counts{6, 6};
  double nu = 1.0;
  double dt = 1e-3;
  double end_time = 1.0;
  double tolerance = 1e-4;
  std::size_t output_every = 10;   // steps between error-trace rows
  std::vector<double> snapshot_times{0.0, 0.2, 0.5, 1.0};
  std::size_t snapshot_resolution = 64;
  std::size_t error_resolution = 256;
  // Initial-condition fit.
  TrainOptions fit{20000, {0.02, 0.9, 1000}, {}, {}};
  std::size_t fit_points_per_axis = 40;
  bool init_heights = true;         // least-squares height solve before the Adam fit
  bool refit_heights = true;        // and after it
  PruneConfig prune_before_evolution;
  std::size_t threads = 1;
};

inline double heat2d_exact(const double* x, double t, double nu) {
  return std::sin(x[0]) * std::sin(x[1]) * std::exp(-2.0 * nu * t);
}

struct EdnnErrorRow {
  double time = 0.0;
  double rel_l2 = 0.0;
  double max_abs = 0.0;     // max |u| on the error grid
  double boundary = 0.0;    // max |u| over boundary grid nodes
};

struct EdnnSnapshot {
  double time = 0.0;
  std::vector<double> points;
  std::vector<double> pred;
  std::vector<double> exact;
};

struct EdnnResult {
  BumpNetModel model;             // fitted model; heights are those at the final time
  BumpNetModel initial_model;     // the same model before evolution
  std::vector<double> initial_heights;
  double ic_mse = 0.0;            // on the fit points
  double ic_mse_before_prune = 0.0;
  LossTrace fit_trace;
  std::vector<EdnnErrorRow> errors;
  std::vector<EdnnSnapshot> snapshots;
  double worst_certificate = 0.0;
  std::size_t evolving_parameters = 0;
};

/// Field D(x) * sum h_i psi_i(x) on a set of points.
inline std::vector<double> ednn_field(const BumpNetModel& model, const SineDistance& dist,
                                      std::span<const double> heights, std::span<const double> points) {
  const std::size_t n = model.dim();
  const CompiledModel cm(model);
  std::vector<double> cache(cm.cache_size()), out(points.size() / n);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double* x = points.data() + k * n;
    out[k] = dist(x).d * cm.forward<0>(x, heights.data(), cache.data()).u;
  }
  return out;
}

/// Least-squares heights for fixed shapes: minimizes sum_k (D_k h.psi(x_k) - y_k)^2.
inline std::vector<double> solve_heights(const BumpNetModel& model, const RegressionData& data) {
  const std::size_t m = model.bump_count();
  const CompiledModel cm(model);
  std::vector<double> cache(cm.cache_size()), basis(m);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(m));
  Eigen::VectorXd b(static_cast<Eigen::Index>(data.size()));
  for (std::size_t k = 0; k < data.size(); ++k) {
    cm.basis(std::span<const double>(data.point(k), data.dim), basis);
    const double w = data.scale.empty() ? 1.0 : data.scale[k];
    for (std::size_t i = 0; i < m; ++i) A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = w * basis[i];
    b(static_cast<Eigen::Index>(k)) = data.values[k];
  }
  const Eigen::VectorXd h = A.colPivHouseholderQr().solve(b);
  return {h.data(), h.data() + h.size()};
}

inline void set_heights(BumpNetModel& model, std::span<const double> h) {
  for (std::size_t i = 0; i < model.bump_count(); ++i) model.block(i)[model.layout().height_offset()] = h[i];
}

inline std::vector<double> get_heights(const BumpNetModel& model) {
  std::vector<double> h(model.bump_count());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = model.height(i);
  return h;
}

/// Fits the initial condition sin x sin y through the distance factor.
inline RegressionData heat2d_ic_data(const BoundingBox& box, const SineDistance& dist, std::size_t per_axis) {
  RegressionData d;
  d.dim = 2;
  d.points = cell_centred_grid(box, {per_axis, per_axis});
  for (std::size_t k = 0; k < d.points.size() / 2; ++k) {
    const double* x = d.points.data() + 2 * k;
    d.values.push_back(heat2d_exact(x, 0.0, 0.0));
    d.scale.push_back(dist(x).d);
  }
  return d;
}

/// Removes the bumps select_prunable() picks, smallest |h| first, re-solving
/// the heights after each removal; a removal that would push the fit MSE above
/// `max_mse` is skipped. Returns the final MSE.
inline double prune_initial_fit(BumpNetModel& model, const RegressionData& data, const PruneConfig& cfg,
                                double max_mse) {
  auto picked = select_prunable(model, cfg);
  std::stable_sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(model.height(a)) < std::abs(model.height(b));
  });
  std::vector<std::size_t> alive(model.bump_count());
  std::iota(alive.begin(), alive.end(), std::size_t{0});
  double current = regression_mse(model, data);
  for (std::size_t original : picked) {
    if (model.bump_count() == 1) break;
    const auto pos = static_cast<std::size_t>(std::lower_bound(alive.begin(), alive.end(), original) - alive.begin());
    BumpNetModel trial = model;
    trial.remove_bumps({pos});
    set_heights(trial, solve_heights(trial, data));
    const double e = regression_mse(trial, data);
    if (!(e <= max_mse)) continue;
    model = std::move(trial);
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(pos));
    current = e;
  }
  return current;
}

inline EdnnResult solve_heat2d(const EdnnConfig& cfg) {
  require(cfg.dt > 0.0 && cfg.end_time > 0.0, "EDNN time step and end time must be positive");
  require(cfg.counts.size() == 2, "EDNN heat benchmark is two-dimensional");
  const auto box = BoundingBox::cube(2, -std::numbers::pi, std::numbers::pi);
  const SineDistance dist{box};
  EdnnResult res;
  res.model = init_grid(cfg.counts, box);

  const auto data = heat2d_ic_data(box, dist, cfg.fit_points_per_axis);
  if (cfg.init_heights) set_heights(res.model, solve_heights(res.model, data));
  res.fit_trace = train_regression(res.model, data, cfg.fit, cfg.threads);
  if (cfg.refit_heights) set_heights(res.model, solve_heights(res.model, data));
  res.ic_mse = res.ic_mse_before_prune = regression_mse(res.model, data);
  if (cfg.prune_before_evolution.active() && res.model.bump_count() > 1)
    res.ic_mse = prune_initial_fit(res.model, data, cfg.prune_before_evolution, 2.0 * res.ic_mse_before_prune);

  const std::size_t m = res.model.bump_count();
  res.evolving_parameters = m;
  std::vector<std::size_t> per_axis;
  for (std::size_t j = 0; j < 2; ++j) per_axis.push_back(2 * cfg.counts[j]);
  while (per_axis[0] * per_axis[1] < 4 * m) ++per_axis[0];
  const FrozenBasis basis(res.model, dist, cell_centred_grid(box, per_axis));
  const HeatEvolution evo(basis, cfg.nu, cfg.tolerance);

  const auto err_grid = uniform_grid(box, cfg.error_resolution);
  const auto snap_grid = uniform_grid(box, cfg.snapshot_resolution);
  std::vector<double> boundary_pts;
  for (std::size_t k = 0; k < err_grid.size() / 2; ++k) {
    const double x = err_grid[2 * k], y = err_grid[2 * k + 1];
    if (x == box.lower[0] || x == box.upper[0] || y == box.lower[1] || y == box.upper[1]) {
      boundary_pts.push_back(x);
      boundary_pts.push_back(y);
    }
  }

  Eigen::VectorXd h(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) h(static_cast<Eigen::Index>(i)) = res.model.height(i);
  res.initial_heights = get_heights(res.model);
  res.initial_model = res.model;

  const std::size_t steps = static_cast<std::size_t>(std::llround(cfg.end_time / cfg.dt));
  std::size_t next_snapshot = 0;
  auto record = [&](std::size_t step) {
    const double t = static_cast<double>(step) * cfg.dt;
    const std::span<const double> hs(h.data(), m);
    const auto pred = ednn_field(res.model, dist, hs, err_grid);
    std::vector<double> exact(pred.size());
    for (std::size_t k = 0; k < exact.size(); ++k) exact[k] = heat2d_exact(err_grid.data() + 2 * k, t, cfg.nu);
    EdnnErrorRow row{t, rel_l2(pred, exact), 0.0, 0.0};
    for (double v : pred) row.max_abs = std::max(row.max_abs, std::abs(v));
    for (double v : ednn_field(res.model, dist, hs, boundary_pts)) row.boundary = std::max(row.boundary, std::abs(v));
    res.errors.push_back(row);
    while (next_snapshot < cfg.snapshot_times.size() && cfg.snapshot_times[next_snapshot] <= t + 0.5 * cfg.dt) {
      EdnnSnapshot s{t, snap_grid, ednn_field(res.model, dist, hs, snap_grid), {}};
      for (std::size_t k = 0; k < s.pred.size(); ++k) s.exact.push_back(heat2d_exact(snap_grid.data() + 2 * k, t, cfg.nu));
      res.snapshots.push_back(std::move(s));
      ++next_snapshot;
    }
  };
  record(0);
  for (std::size_t step = 1; step <= steps; ++step) {
    h = evo.step(h, cfg.dt);
    if (step % cfg.output_every == 0 || step == steps) record(step);
  }
  res.worst_certificate = evo.worst_certificate();
  set_heights(res.model, std::span<const double>(h.data(), m));
  return res;
}

}  // namespace bumpnet
