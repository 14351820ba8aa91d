#pragma once

// PDE problems, collocation sampling and the collocation loss (optionally
// with self-adaptive per-point weights) for training a BumpNet as a PINN.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bumpnet/assembly.hpp"
#include "bumpnet/compiled.hpp"
#include "bumpnet/error.hpp"
#include "bumpnet/model.hpp"
#include "bumpnet/optim.hpp"

namespace bumpnet {

/// Residual value and its partial derivatives with respect to u, du/dx_k and
/// d2u/dx_k^2 at one point.
struct ResidualEval {
  double value = 0.0;
  PointJet partial;
};

using ResidualFn = std::function<ResidualEval(const double* x, const PointJet& u)>;
using ScalarField = std::function<double(const double* x)>;

struct BoundarySegment {
  enum class Kind { Dirichlet, Periodic };
  Kind kind = Kind::Dirichlet;
  std::size_t axis = 0;
  bool upper = false;  // Dirichlet only: which face of `axis`
  ScalarField value;   // Dirichlet target
  std::string name;
};

struct PdeProblem {
  std::string name;
  BoundingBox box;
  int order = 2;  // highest spatial derivative used by the residual
  ResidualFn residual;
  ScalarField source;
  ScalarField exact;  // may be empty
  std::vector<BoundarySegment> boundary;
};

/// Residual  c0*u + sum_k c1[k]*du_k + sum_k c2[k]*d2u_k - f(x).
inline ResidualFn linear_residual(double c0, std::array<double, kMaxDim> c1, std::array<double, kMaxDim> c2,
                                  ScalarField f, std::size_t dim) {
  return [=](const double* x, const PointJet& u) {
    ResidualEval r;
    r.value = c0 * u.u - f(x);
    r.partial.u = c0;
    for (std::size_t k = 0; k < dim; ++k) {
      r.value += c1[k] * u.du[k] + c2[k] * u.d2u[k];
      r.partial.du[k] = c1[k];
      r.partial.d2u[k] = c2[k];
    }
    return r;
  };
}

inline BoundarySegment dirichlet(std::size_t axis, bool upper, ScalarField g, std::string name) {
  return {BoundarySegment::Kind::Dirichlet, axis, upper, std::move(g), std::move(name)};
}

inline BoundarySegment periodic(std::size_t axis, std::string name) {
  return {BoundarySegment::Kind::Periodic, axis, false, {}, std::move(name)};
}

// ---------------------------------------------------------------------------
// Benchmarks.

/// u_xx + u_yy + k^2 u = q on [-3,3]^2 with u = sin(pi x) sin(pi y).
inline PdeProblem helmholtz(double k = 1.0) {
  constexpr double pi = std::numbers::pi;
  PdeProblem p;
  p.name = "helmholtz";
  p.box = BoundingBox::cube(2, -3.0, 3.0);
  p.exact = [](const double* x) { return std::sin(pi * x[0]) * std::sin(pi * x[1]); };
  p.source = [k](const double* x) { return (k * k - 2 * pi * pi) * std::sin(pi * x[0]) * std::sin(pi * x[1]); };
  p.residual = linear_residual(k * k, {}, {1.0, 1.0}, p.source, 2);
  p.boundary = {dirichlet(0, false, p.exact, "x=-3"), dirichlet(0, true, p.exact, "x=3"),
                dirichlet(1, false, p.exact, "y=-3"), dirichlet(1, true, p.exact, "y=3")};
  return p;
}

/// u_xx + u_yy = -20 pi^2 sin(2 pi x) sin(4 pi y) on [0,1]^2, zero boundary.
/// The source sign makes u = sin(2 pi x) sin(4 pi y) an exact solution.
inline PdeProblem poisson2d() {
  constexpr double pi = std::numbers::pi;
  PdeProblem p;
  p.name = "poisson";
  p.box = BoundingBox::cube(2, 0.0, 1.0);
  p.exact = [](const double* x) { return std::sin(2 * pi * x[0]) * std::sin(4 * pi * x[1]); };
  p.source = [](const double* x) { return -20 * pi * pi * std::sin(2 * pi * x[0]) * std::sin(4 * pi * x[1]); };
  p.residual = linear_residual(0.0, {}, {1.0, 1.0}, p.source, 2);
  const ScalarField zero = [](const double*) { return 0.0; };
  p.boundary = {dirichlet(0, false, zero, "x=0"), dirichlet(0, true, zero, "x=1"), dirichlet(1, false, zero, "y=0"),
                dirichlet(1, true, zero, "y=1")};
  return p;
}

/// u_t = alpha u_xx + 2 sin(pi x) on (x, t) in [0,1] x [0,5], u(x,0) = sin(2 pi x).
inline PdeProblem heat1d(double alpha = 1.0) {
  constexpr double pi = std::numbers::pi;
  PdeProblem p;
  p.name = "heat";
  p.box = BoundingBox({0.0, 0.0}, {1.0, 5.0});
  p.exact = [alpha](const double* x) {
    const double t = x[1];
    return std::exp(-4 * pi * pi * alpha * t) * std::sin(2 * pi * x[0]) +
           2.0 / (pi * pi * alpha) * (1.0 - std::exp(-pi * pi * alpha * t)) * std::sin(pi * x[0]);
  };
  p.source = [](const double* x) { return 2.0 * std::sin(pi * x[0]); };
  // u_t - alpha u_xx - 2 sin(pi x)
  p.residual = linear_residual(0.0, {0.0, 1.0}, {-alpha, 0.0}, p.source, 2);
  const ScalarField zero = [](const double*) { return 0.0; };
  p.boundary = {dirichlet(0, false, zero, "x=0"), dirichlet(0, true, zero, "x=1"),
                dirichlet(1, false, [](const double* x) { return std::sin(2 * pi * x[0]); }, "t=0")};
  return p;
}

/// u_t + nu u_x = 0 on (x, t) in [0, 2 pi] x [0, 1], u(x,0) = sin x, periodic in x.
inline PdeProblem advection(double nu = 30.0) {
  constexpr double pi = std::numbers::pi;
  PdeProblem p;
  p.name = "advection";
  p.box = BoundingBox({0.0, 0.0}, {2 * pi, 1.0});
  p.order = 1;
  p.exact = [nu](const double* x) { return std::sin(x[0] - nu * x[1]); };
  p.source = [](const double*) { return 0.0; };
  p.residual = linear_residual(0.0, {nu, 1.0}, {}, p.source, 2);
  p.boundary = {periodic(0, "x=0|x=2pi"), dirichlet(1, false, [](const double* x) { return std::sin(x[0]); }, "t=0")};
  return p;
}

inline PdeProblem problem_by_name(const std::string& name, double param = std::nan("")) {
  const bool has = !std::isnan(param);
  if (name == "helmholtz") return helmholtz(has ? param : 1.0);
  if (name == "poisson") return poisson2d();
  if (name == "heat") return heat1d(has ? param : 1.0);
  if (name == "advection") return advection(has ? param : 30.0);
  throw ValidationError("unknown problem '" + name + "' (expected helmholtz, poisson, heat or advection)");
}

// ---------------------------------------------------------------------------
// Collocation points.

struct CollocationSet {
  std::size_t dim = 0;
  std::vector<double> interior;  // row-major N_r x dim
  struct Group {
    std::size_t segment = 0;
    std::vector<double> points;  // row-major; for periodic segments, points on the lower face
  };
  std::vector<Group> boundary;
  std::uint64_t seed = 0;

  std::size_t interior_count() const { return dim ? interior.size() / dim : 0; }
  std::size_t boundary_count() const {
    std::size_t c = 0;
    for (const auto& g : boundary) c += g.points.size() / dim;
    return c;
  }
};

/// Uniform interior points and n_boundary uniform points per boundary segment.
inline CollocationSet sample_collocation(const PdeProblem& problem, std::size_t n_interior, std::size_t n_boundary,
                                         std::uint64_t seed) {
  require(n_interior > 0 && n_boundary > 0, "collocation counts must be positive");
  const auto& box = problem.box;
  const std::size_t n = box.dim();
  CollocationSet c;
  c.dim = n;
  c.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto coord = [&](std::size_t j) {
    for (;;) {
      const double v = box.lower[j] + unit(rng) * box.extent(j);
      if (v > box.lower[j] && v < box.upper[j]) return v;
    }
  };
  c.interior.resize(n_interior * n);
  for (std::size_t i = 0; i < n_interior; ++i)
    for (std::size_t j = 0; j < n; ++j) c.interior[i * n + j] = coord(j);
  for (std::size_t s = 0; s < problem.boundary.size(); ++s) {
    const auto& seg = problem.boundary[s];
    require(seg.axis < n, "boundary segment axis out of range");
    CollocationSet::Group g{s, std::vector<double>(n_boundary * n)};
    for (std::size_t i = 0; i < n_boundary; ++i)
      for (std::size_t j = 0; j < n; ++j)
        g.points[i * n + j] = j == seg.axis ? (seg.upper ? box.upper[j] : box.lower[j]) : coord(j);
    c.boundary.push_back(std::move(g));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Loss.

/// Self-adaptive weights with the square mask m(lambda) = lambda^2.
struct SaWeights {
  std::vector<double> residual;
  std::vector<double> boundary;

  static SaWeights ones(const CollocationSet& c) {
    return {std::vector<double>(c.interior_count(), 1.0), std::vector<double>(c.boundary_count(), 1.0)};
  }
  static double mask(double lambda) { return lambda * lambda; }
  static double mask_derivative(double lambda) { return 2.0 * lambda; }
};

/// Squared point errors left by the last loss evaluation, in collocation order.
struct PointErrors {
  std::vector<double> residual;
  std::vector<double> boundary;
};

namespace detail {

struct BoundaryItem {
  const double* x;
  const BoundarySegment* segment;
};

inline std::vector<BoundaryItem> boundary_items(const PdeProblem& problem, const CollocationSet& c) {
  std::vector<BoundaryItem> out;
  for (const auto& g : c.boundary)
    for (std::size_t i = 0; i < g.points.size() / c.dim; ++i)
      out.push_back({g.points.data() + i * c.dim, &problem.boundary[g.segment]});
  return out;
}

inline std::string format_point(const double* x, std::size_t n) {
  std::string s = "(";
  char buf[32];
  for (std::size_t j = 0; j < n; ++j) {
    std::snprintf(buf, sizeof(buf), "%s%.17g", j ? ", " : "", x[j]);
    s += buf;
  }
  return s + ")";
}

}  // namespace detail

/// Mean squared residual plus mean squared boundary mismatch, each point
/// optionally multiplied by m(lambda). Writes the raw-parameter gradient into
/// `grad` when it is non-empty, and the squared point errors into `errors`
/// when given.
inline LossParts pinn_loss(const CompiledModel& cm, const PdeProblem& problem, const CollocationSet& colloc,
                           const SaWeights* sa, std::span<double> grad, PointErrors* errors = nullptr,
                           std::size_t threads = 1) {
  require(cm.dim() == problem.box.dim() && colloc.dim == cm.dim(), "collocation/problem/model dimensions differ");
  const std::size_t n = cm.dim();
  const std::size_t nr = colloc.interior_count();
  const auto bitems = detail::boundary_items(problem, colloc);
  const std::size_t nb = bitems.size();
  require(nr > 0 && nb > 0, "collocation set is empty");
  if (sa) require(sa->residual.size() == nr && sa->boundary.size() == nb, "self-adaptive weights do not match");
  if (errors) {
    errors->residual.assign(nr, 0.0);
    errors->boundary.assign(nb, 0.0);
  }
  const double inv_r = 1.0 / static_cast<double>(nr);
  const double inv_b = 1.0 / static_cast<double>(nb);
  const int order = problem.order;
  const bool want_grad = !grad.empty();

  auto acc = assemble(cm, nr + nb, want_grad, threads, [&](std::size_t k, PointEvaluator& ev) -> std::array<double, 2> {
    if (k < nr) {
      const double* x = colloc.interior.data() + k * n;
      const PointJet u = ev.eval(0, order, x);
      const ResidualEval r = problem.residual(x, u);
      const double w = (sa ? SaWeights::mask(sa->residual[k]) : 1.0) * inv_r;
      if (errors) errors->residual[k] = r.value * r.value;
      if (ev.with_grad()) {
        const double g = 2.0 * w * r.value;
        PointJet s;
        s.u = g * r.partial.u;
        for (std::size_t a = 0; a < n; ++a) {
          s.du[a] = g * r.partial.du[a];
          s.d2u[a] = g * r.partial.d2u[a];
        }
        ev.seed(0, order, x, s);
      }
      return {w * r.value * r.value, 0.0};
    }
    const std::size_t b = k - nr;
    const auto& item = bitems[b];
    const double w = (sa ? SaWeights::mask(sa->boundary[b]) : 1.0) * inv_b;
    double e;
    if (item.segment->kind == BoundarySegment::Kind::Dirichlet) {
      e = ev.eval(0, 0, item.x).u - item.segment->value(item.x);
      if (ev.with_grad()) {
        PointJet s;
        s.u = 2.0 * w * e;
        ev.seed(0, 0, item.x, s);
      }
    } else {
      std::array<double, kMaxDim> hi{};
      for (std::size_t a = 0; a < n; ++a) hi[a] = item.x[a];
      hi[item.segment->axis] = problem.box.upper[item.segment->axis];
      e = ev.eval(0, 0, item.x).u - ev.eval(1, 0, hi.data()).u;
      if (ev.with_grad()) {
        PointJet s;
        s.u = 2.0 * w * e;
        ev.seed(0, 0, item.x, s);
        s.u = -s.u;
        ev.seed(1, 0, hi.data(), s);
      }
    }
    if (errors) errors->boundary[b] = e * e;
    return {0.0, w * e * e};
  });

  LossParts out{acc.residual + acc.boundary, acc.residual, acc.boundary};
  if (!std::isfinite(out.total)) {
    // Locate the first offending point for the message.
    std::vector<double> cache(cm.cache_size());
    for (std::size_t k = 0; k < nr; ++k) {
      const double* x = colloc.interior.data() + k * n;
      if (!std::isfinite(problem.residual(x, cm.forward(order, x, nullptr, cache.data())).value))
        throw NumericalError("non-finite residual at collocation point " + detail::format_point(x, n));
    }
    for (const auto& item : bitems)
      if (!std::isfinite(cm.forward(0, item.x, nullptr, cache.data()).u))
        throw NumericalError("non-finite boundary value at point " + detail::format_point(item.x, n));
    throw NumericalError("non-finite collocation loss");
  }
  if (want_grad) cm.chain_to_raw(acc.frame_adj, acc.amp_adj, grad);
  return out;
}

inline LossParts pinn_loss(const BumpNetModel& model, const PdeProblem& problem, const CollocationSet& colloc,
                           const SaWeights* sa = nullptr) {
  return pinn_loss(CompiledModel(model), problem, colloc, sa, {});
}

/// dL/dlambda for every weight, residual weights first: m'(lambda_i) e_i^2 / N.
inline std::vector<double> sa_gradient(const SaWeights& sa, const PointErrors& errors) {
  require(errors.residual.size() == sa.residual.size() && errors.boundary.size() == sa.boundary.size(),
          "point errors do not match the self-adaptive weights");
  const double inv_r = 1.0 / static_cast<double>(sa.residual.size());
  const double inv_b = 1.0 / static_cast<double>(sa.boundary.size());
  std::vector<double> g;
  g.reserve(sa.residual.size() + sa.boundary.size());
  for (std::size_t i = 0; i < sa.residual.size(); ++i)
    g.push_back(SaWeights::mask_derivative(sa.residual[i]) * errors.residual[i] * inv_r);
  for (std::size_t i = 0; i < sa.boundary.size(); ++i)
    g.push_back(SaWeights::mask_derivative(sa.boundary[i]) * errors.boundary[i] * inv_b);
  return g;
}

/// The same loss for an arbitrary field given as x -> (u, du, d2u). Value only.
inline LossParts collocation_loss(const std::function<PointJet(const double*)>& field, const PdeProblem& problem,
                                  const CollocationSet& colloc, const SaWeights* sa = nullptr) {
  const std::size_t n = colloc.dim;
  const std::size_t nr = colloc.interior_count();
  const auto bitems = detail::boundary_items(problem, colloc);
  LossParts out;
  for (std::size_t k = 0; k < nr; ++k) {
    const double* x = colloc.interior.data() + k * n;
    const double r = problem.residual(x, field(x)).value;
    out.residual += (sa ? SaWeights::mask(sa->residual[k]) : 1.0) * r * r;
  }
  for (std::size_t b = 0; b < bitems.size(); ++b) {
    const auto& item = bitems[b];
    double e;
    if (item.segment->kind == BoundarySegment::Kind::Dirichlet) {
      e = field(item.x).u - item.segment->value(item.x);
    } else {
      std::vector<double> hi(item.x, item.x + n);
      hi[item.segment->axis] = problem.box.upper[item.segment->axis];
      e = field(item.x).u - field(hi.data()).u;
    }
    out.boundary += (sa ? SaWeights::mask(sa->boundary[b]) : 1.0) * e * e;
  }
  out.residual /= static_cast<double>(nr);
  out.boundary /= static_cast<double>(bitems.size());
  out.total = out.residual + out.boundary;
  return out;
}

// ---------------------------------------------------------------------------
// Least-squares heights.

/// Heights minimising the unweighted collocation loss with every bump shape
/// held fixed. Exact for residuals that are affine in u; for other residuals
/// this is one Gauss-Newton step from h = 0. Requires a model with heights.
inline std::vector<double> least_squares_heights(const BumpNetModel& model, const PdeProblem& problem,
                                                 const CollocationSet& colloc) {
  require(model.include_heights(), "least-squares heights need a model with heights");
  const CompiledModel cm(model);
  const std::size_t n = cm.dim(), m = cm.bump_count();
  const std::size_t nr = colloc.interior_count();
  const auto bitems = detail::boundary_items(problem, colloc);
  const std::size_t nb = bitems.size();
  require(nr > 0 && nb > 0, "collocation set is empty");
  const double wr = std::sqrt(1.0 / static_cast<double>(nr)), wb = std::sqrt(1.0 / static_cast<double>(nb));
  Eigen::MatrixXd a(nr + nb, m);
  Eigen::VectorXd rhs(nr + nb);
  std::vector<double> cache(cm.cache_size()), amps(m, 0.0);
  auto basis_jet = [&](std::size_t i, int order, const double* x) {
    amps[i] = 1.0;
    const PointJet j = cm.forward(order, x, amps.data(), cache.data());
    amps[i] = 0.0;
    return j;
  };
  for (std::size_t k = 0; k < nr; ++k) {
    const double* x = colloc.interior.data() + k * n;
    const ResidualEval r0 = problem.residual(x, PointJet{});
    rhs(k) = -wr * r0.value;
    for (std::size_t i = 0; i < m; ++i) {
      const PointJet psi = basis_jet(i, problem.order, x);
      double v = r0.partial.u * psi.u;
      for (std::size_t d = 0; d < n; ++d) v += r0.partial.du[d] * psi.du[d] + r0.partial.d2u[d] * psi.d2u[d];
      a(k, i) = wr * v;
    }
  }
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& item = bitems[b];
    const bool periodic = item.segment->kind == BoundarySegment::Kind::Periodic;
    std::array<double, kMaxDim> hi{};
    for (std::size_t d = 0; d < n; ++d) hi[d] = item.x[d];
    if (periodic) hi[item.segment->axis] = problem.box.upper[item.segment->axis];
    rhs(nr + b) = periodic ? 0.0 : wb * item.segment->value(item.x);
    for (std::size_t i = 0; i < m; ++i) {
      double v = basis_jet(i, 0, item.x).u;
      if (periodic) v -= basis_jet(i, 0, hi.data()).u;
      a(nr + b, i) = wb * v;
    }
  }
  const Eigen::VectorXd h = a.colPivHouseholderQr().solve(rhs);
  if (!h.allFinite()) throw NumericalError("least-squares height solve produced non-finite heights");
  return {h.data(), h.data() + h.size()};
}

// ---------------------------------------------------------------------------
// Training.

struct PinnOptions {
  TrainOptions train;
  bool self_adaptive = false;
  LrSchedule sa_schedule{0.02, 0.9, 1000};
  /// Replace the initial heights by least_squares_heights() before training.
  bool init_heights = false;
  std::size_t threads = 1;
};

/// Objective for train(): descends on the model parameters and, when
/// self-adaptive weights are enabled, ascends on the weights after each step.
class PinnObjective {
 public:
  PinnObjective(const PdeProblem& problem, const CollocationSet& colloc, const PinnOptions& opt)
      : problem_(problem), colloc_(colloc), opt_(opt) {
    if (opt.self_adaptive) {
      sa_ = SaWeights::ones(colloc);
      sa_adam_ = AdamState(sa_.residual.size() + sa_.boundary.size(), opt.train.adam);
    }
  }

  LossParts operator()(const BumpNetModel&, const CompiledModel& cm, std::span<double> grad) {
    return pinn_loss(cm, problem_, colloc_, opt_.self_adaptive ? &sa_ : nullptr, grad,
                     opt_.self_adaptive ? &errors_ : nullptr, opt_.threads);
  }

  void post_step(double) {
    if (!opt_.self_adaptive) return;
    const std::size_t nr = sa_.residual.size();
    std::vector<double> lambda(sa_.residual);
    lambda.insert(lambda.end(), sa_.boundary.begin(), sa_.boundary.end());
    sa_adam_.ascend(lambda, sa_gradient(sa_, errors_), opt_.sa_schedule.rate(sa_steps_++));
    std::copy(lambda.begin(), lambda.begin() + static_cast<std::ptrdiff_t>(nr), sa_.residual.begin());
    std::copy(lambda.begin() + static_cast<std::ptrdiff_t>(nr), lambda.end(), sa_.boundary.begin());
  }

  const SaWeights& weights() const { return sa_; }
  const PointErrors& errors() const { return errors_; }

 private:
  const PdeProblem& problem_;
  const CollocationSet& colloc_;
  PinnOptions opt_;
  SaWeights sa_;
  AdamState sa_adam_;
  PointErrors errors_;
  std::size_t sa_steps_ = 0;
};

struct PinnResult {
  LossTrace trace;
  SaWeights weights;
};

inline PinnResult train_pinn(BumpNetModel& model, const PdeProblem& problem, const CollocationSet& colloc,
                             const PinnOptions& opt) {
  if (opt.init_heights) {
    const auto h = least_squares_heights(model, problem, colloc);
    for (std::size_t i = 0; i < h.size(); ++i) model.block(i)[model.layout().height_offset()] = h[i];
  }
  PinnObjective obj(problem, colloc, opt);
  PinnResult res;
  res.trace = train(model, obj, opt.train);
  res.weights = obj.weights();
  return res;
}

}  // namespace bumpnet
