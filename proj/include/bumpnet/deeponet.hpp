#pragma once

// Operator learning with a BumpNet trunk: u(f)(x) = sum_i c_i(f) b_i(x) + b0,
// where c = branch(f) and b_i are height-free bumps. Includes the
// reaction-diffusion dataset generator and its text format.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bumpnet/compiled.hpp"
#include "bumpnet/error.hpp"
#include "bumpnet/fd_solver.hpp"
#include "bumpnet/grf.hpp"
#include "bumpnet/mlp.hpp"
#include "bumpnet/model.hpp"
#include "bumpnet/optim.hpp"

namespace bumpnet {

struct DeepOnetModel {
  Mlp branch;
  BumpNetModel trunk;
  double bias = 0.0;

  std::size_t parameter_count() const { return branch.parameter_count() + trunk.parameter_count() + 1; }
  bool operator==(const DeepOnetModel&) const = default;
};

struct DeepOnetArchitecture {
  std::vector<std::size_t> branch_widths{100, 50, 50, 100};
  std::vector<std::size_t> trunk_counts{10, 10};
  double trunk_sharpness = kInitialSharpness;
};

inline DeepOnetModel make_deeponet(const DeepOnetArchitecture& arch, std::uint64_t seed) {
  const BoundingBox box = BoundingBox::cube(2, 0.0, 1.0);
  DeepOnetModel m{Mlp(arch.branch_widths, seed), init_grid(arch.trunk_counts, box, false, arch.trunk_sharpness), 0.0};
  require(m.branch.output_size() == m.trunk.bump_count(), "branch output width " +
                                                              std::to_string(m.branch.output_size()) +
                                                              " must equal the trunk bump count " +
                                                              std::to_string(m.trunk.bump_count()));
  return m;
}

/// sum_i c_i b_i(x) + b0 for given branch coefficients.
inline double deeponet_combine(const CompiledModel& trunk, std::span<const double> c, double bias, const double* x,
                               std::vector<double>& cache) {
  require(c.size() == trunk.bump_count(), "coefficient vector does not match the trunk");
  cache.resize(trunk.cache_size());
  return trunk.forward<0>(x, c.data(), cache.data()).u + bias;
}

inline double deeponet_forward(const DeepOnetModel& model, std::span<const double> f, std::span<const double> x) {
  require(f.size() == model.branch.input_size(), "forcing has " + std::to_string(f.size()) +
                                                     " sensor values, the branch expects " +
                                                     std::to_string(model.branch.input_size()));
  require(x.size() == model.trunk.dim(), "query point dimension does not match the trunk");
  const auto c = model.branch(f);
  std::vector<double> cache;
  return deeponet_combine(CompiledModel(model.trunk), c, model.bias, x.data(), cache);
}

// ---------------------------------------------------------------------------
// Dataset.

struct DatasetSpec {
  std::size_t functions = 1000;
  std::size_t points = 100;  // query points per function
  std::size_t sensors = 100;
  double length_scale = 0.2;
  double sigma = 1.0;
  FdGrid grid;
  ReactionDiffusion pde;
  std::uint64_t seed = 0;
};

struct OperatorDataset {
  DatasetSpec spec;
  std::vector<double> forcing;  // functions x sensors
  std::vector<double> queries;  // functions x points x (x, t)
  std::vector<double> values;   // functions x points

  std::size_t function_count() const { return spec.functions; }
  std::span<const double> f(std::size_t k) const {
    return std::span<const double>(forcing).subspan(k * spec.sensors, spec.sensors);
  }
};

/// GRF forcings solved on the FD grid; query points are distinct grid nodes
/// drawn uniformly per function.
inline OperatorDataset generate_dataset(const DatasetSpec& spec) {
  require(spec.functions > 0 && spec.points > 0, "dataset needs at least one function and one point");
  const std::size_t nodes = (spec.grid.nx + 1) * (spec.grid.nt + 1);
  require(spec.points <= nodes, "more query points than FD grid nodes");
  const GrfSampler grf(spec.sensors, spec.length_scale, spec.sigma);
  OperatorDataset d{spec, grf.sample(spec.functions, spec.seed), {}, {}};
  d.queries.reserve(spec.functions * spec.points * 2);
  d.values.reserve(spec.functions * spec.points);
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> idx(nodes);
  for (std::size_t k = 0; k < spec.functions; ++k) {
    const auto sol = fd_solve_rd(d.f(k), spec.grid, spec.pde);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t q = 0; q < spec.points; ++q) {  // partial Fisher-Yates
      std::uniform_int_distribution<std::size_t> pick(q, nodes - 1);
      std::swap(idx[q], idx[pick(rng)]);
      const std::size_t i = idx[q] % (spec.grid.nx + 1), n = idx[q] / (spec.grid.nx + 1);
      d.queries.push_back(sol.x(i));
      d.queries.push_back(sol.t(n));
      d.values.push_back(sol.at(i, n));
    }
  }
  return d;
}

inline constexpr const char* kDatasetTag = "bumpnet.operator-dataset.v1";

/// Header lines "key values...", then one "f k v_1 ... v_ms" line per
/// function followed by its "q k x t u" lines.
inline void save_dataset(const OperatorDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset " + path);
  const auto& s = d.spec;
  char buf[128];
  out << kDatasetTag << '\n';
  out << "functions " << s.functions << "\npoints " << s.points << "\nsensors " << s.sensors << '\n';
  std::snprintf(buf, sizeof(buf), "kernel %.17g %.17g\n", s.length_scale, s.sigma);
  out << buf << "grid " << s.grid.nx << ' ' << s.grid.nt << '\n';
  std::snprintf(buf, sizeof(buf), "pde %.17g %.17g %.17g\n", s.pde.diffusion, s.pde.reaction, s.pde.end_time);
  out << buf << "seed " << s.seed << '\n';
  for (std::size_t k = 0; k < s.functions; ++k) {
    out << "f " << k;
    for (double v : d.f(k)) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << '\n';
    for (std::size_t q = 0; q < s.points; ++q) {
      const std::size_t r = k * s.points + q;
      std::snprintf(buf, sizeof(buf), "q %zu %.17g %.17g %.17g\n", k, d.queries[2 * r], d.queries[2 * r + 1],
                    d.values[r]);
      out << buf;
    }
  }
  if (!out) throw ValidationError("failed writing dataset " + path);
}

inline OperatorDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path);
  std::string line;
  std::size_t lineno = 1;
  auto fail = [&](const std::string& what) {
    throw ValidationError(path + ":" + std::to_string(lineno) + ": " + what);
  };
  if (!std::getline(in, line) || line != kDatasetTag) fail("not an operator dataset (missing '" + std::string(kDatasetTag) + "')");
  OperatorDataset d;
  auto& s = d.spec;
  for (const char* key : {"functions", "points", "sensors", "kernel", "grid", "pde", "seed"}) {
    ++lineno;
    if (!std::getline(in, line)) fail("truncated header");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) fail("expected header key '" + std::string(key) + "', found '" + k + "'");
    if (k == "functions") ls >> s.functions;
    else if (k == "points") ls >> s.points;
    else if (k == "sensors") ls >> s.sensors;
    else if (k == "kernel") ls >> s.length_scale >> s.sigma;
    else if (k == "grid") ls >> s.grid.nx >> s.grid.nt;
    else if (k == "pde") ls >> s.pde.diffusion >> s.pde.reaction >> s.pde.end_time;
    else ls >> s.seed;
    if (ls.fail()) fail("malformed '" + k + "' line");
  }
  d.forcing.reserve(s.functions * s.sensors);
  d.queries.reserve(s.functions * s.points * 2);
  d.values.reserve(s.functions * s.points);
  for (std::size_t k = 0; k < s.functions; ++k) {
    ++lineno;
    if (!std::getline(in, line)) fail("truncated dataset");
    std::istringstream ls(line);
    std::string tag;
    std::size_t id = 0;
    ls >> tag >> id;
    if (tag != "f" || id != k) fail("expected forcing line for function " + std::to_string(k));
    for (std::size_t j = 0; j < s.sensors; ++j) {
      double v;
      if (!(ls >> v)) fail("forcing line has too few sensor values");
      d.forcing.push_back(v);
    }
    for (std::size_t q = 0; q < s.points; ++q) {
      ++lineno;
      if (!std::getline(in, line)) fail("truncated dataset");
      std::istringstream qs(line);
      double x, t, u;
      qs >> tag >> id >> x >> t >> u;
      if (qs.fail() || tag != "q" || id != k) fail("expected query line for function " + std::to_string(k));
      d.queries.push_back(x);
      d.queries.push_back(t);
      d.values.push_back(u);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Training.

struct DeepOnetTrainOptions {
  std::size_t steps = 20000;
  std::size_t batch_functions = 10;
  LrSchedule schedule{1e-3, 0.9, 1000};
  AdamConfig adam;
  std::uint64_t seed = 0;  // batch order
  std::size_t threads = 1;
  std::size_t log_every = 100;
};

struct DeepOnetTraceRow {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct DeepOnetResult {
  std::vector<DeepOnetTraceRow> trace;
  double train_mse = 0.0;
  double test_mse = 0.0;
  bool centers_inside = true;  // every trunk center inside the box at every step
};

namespace detail {

/// Loss over functions `fns` (all their query points) and, when grad is
/// non-empty, its gradient laid out as [branch | trunk raw | bias].
inline double deeponet_batch(const DeepOnetModel& model, const CompiledModel& trunk, const OperatorDataset& data,
                             std::span<const std::size_t> fns, std::span<double> grad, std::size_t threads) {
  const std::size_t pts = data.spec.points, m = trunk.bump_count();
  const std::size_t nb = model.branch.parameter_count(), fs = trunk.frame_size();
  const bool want = !grad.empty();
  const double scale = 1.0 / static_cast<double>(fns.size() * pts);
  struct Partial {
    double loss = 0.0, bias = 0.0;
    std::vector<double> branch, frame;
  };
  // One chunk item per function keeps the reduction order fixed.
  std::vector<Partial> parts(fns.size());
  auto body = [&](std::size_t, std::size_t begin, std::size_t end) {
    Mlp::Workspace ws;
    std::vector<double> cache(trunk.cache_size()), camp(m);
    for (std::size_t b = begin; b < end; ++b) {
      Partial& p = parts[b];
      if (want) {
        p.branch.assign(nb, 0.0);
        p.frame.assign(m * fs, 0.0);
      }
      const std::size_t k = fns[b];
      model.branch.forward(data.f(k), ws);
      const auto& c = ws.act.back();
      std::fill(camp.begin(), camp.end(), 0.0);
      for (std::size_t q = 0; q < pts; ++q) {
        const std::size_t r = k * pts + q;
        const double* x = data.queries.data() + 2 * r;
        const double u = trunk.forward<0>(x, c.data(), cache.data()).u + model.bias;
        const double e = u - data.values[r];
        p.loss += e * e;
        if (!want) continue;
        PointJet s;
        s.u = 2.0 * e * scale;
        p.bias += s.u;
        trunk.backward<0>(x, c.data(), cache.data(), s, p.frame.data(), camp.data());
      }
      if (want) model.branch.backward(ws, camp, p.branch);
    }
  };
  const std::size_t nf = fns.size();
  if (threads <= 1) {
    body(0, 0, nf);
  } else {
    std::vector<std::thread> pool;
    const std::size_t w = std::min(threads, nf);
    for (std::size_t t = 0; t < w; ++t)
      pool.emplace_back([&, t] { body(t, t * nf / w, (t + 1) * nf / w); });
    for (auto& th : pool) th.join();
  }
  double loss = 0.0;
  std::vector<double> frame;
  if (want) frame.assign(m * fs, 0.0);
  for (const auto& p : parts) {
    loss += p.loss;
    if (!want) continue;
    for (std::size_t i = 0; i < nb; ++i) grad[i] += p.branch[i];
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] += p.frame[i];
    grad[grad.size() - 1] += p.bias;
  }
  if (want) trunk.chain_to_raw(frame, {}, grad.subspan(nb, model.trunk.parameter_count()));
  return loss * scale;
}

}  // namespace detail

/// Mean squared error over every query point of the dataset.
inline double deeponet_mse(const DeepOnetModel& model, const OperatorDataset& data, std::size_t threads = 1) {
  require(data.spec.sensors == model.branch.input_size(), "dataset sensor count does not match the branch");
  std::vector<std::size_t> all(data.function_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return detail::deeponet_batch(model, CompiledModel(model.trunk), data, all, {}, threads);
}

/// Predictions aligned with data.values.
inline std::vector<double> deeponet_predict(const DeepOnetModel& model, const OperatorDataset& data) {
  require(data.spec.sensors == model.branch.input_size(), "dataset sensor count does not match the branch");
  const CompiledModel trunk(model.trunk);
  std::vector<double> out(data.values.size()), cache;
  const std::size_t q = data.spec.points;
  for (std::size_t k = 0; k < data.function_count(); ++k) {
    const auto c = model.branch(data.f(k));
    for (std::size_t i = 0; i < q; ++i)
      out[k * q + i] = deeponet_combine(trunk, c, model.bias, data.queries.data() + 2 * (k * q + i), cache);
  }
  return out;
}

/// Loss and gradient on a set of functions; gradient layout [branch | trunk raw | bias].
inline double deeponet_loss(const DeepOnetModel& model, const OperatorDataset& data, std::span<const std::size_t> fns,
                            std::span<double> grad, std::size_t threads = 1) {
  require(grad.empty() || grad.size() == model.parameter_count(), "gradient has the wrong length");
  return detail::deeponet_batch(model, CompiledModel(model.trunk, !grad.empty()), data, fns, grad, threads);
}

inline bool trunk_centers_inside(const BumpNetModel& trunk) {
  const auto& box = trunk.bbox();
  for (std::size_t i = 0; i < trunk.bump_count(); ++i) {
    const auto g = trunk.geometry(i);
    for (std::size_t j = 0; j < trunk.dim(); ++j)
      if (!(g.center[j] >= box.lower[j] && g.center[j] <= box.upper[j])) return false;
  }
  return true;
}

/// Minibatch Adam over whole functions, reshuffled every pass through the
/// training set.
inline DeepOnetResult train_deeponet(DeepOnetModel& model, const OperatorDataset& train, const OperatorDataset* test,
                                     const DeepOnetTrainOptions& opt) {
  require(train.spec.sensors == model.branch.input_size(), "dataset sensor count does not match the branch");
  require(opt.batch_functions >= 1, "batch must contain at least one function");
  const std::size_t nb = model.branch.parameter_count(), nt = model.trunk.parameter_count();
  const std::size_t total = model.parameter_count();
  AdamState adam(total, opt.adam);
  std::vector<double> theta(total), grad(total);
  std::vector<std::size_t> order(train.function_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(opt.seed);
  std::size_t cursor = order.size();
  DeepOnetResult res;
  const std::size_t batch = std::min(opt.batch_functions, order.size());
  for (std::size_t step = 0; step < opt.steps; ++step) {
    if (cursor + batch > order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::span<const std::size_t> fns(order.data() + cursor, batch);
    cursor += batch;
    std::fill(grad.begin(), grad.end(), 0.0);
    const double lr = opt.schedule.rate(step);
    const double loss = deeponet_loss(model, train, fns, grad, opt.threads);
    if (!std::isfinite(loss)) throw NumericalError("operator training diverged at step " + std::to_string(step));
    if (opt.log_every && (step % opt.log_every == 0 || step + 1 == opt.steps)) res.trace.push_back({step, lr, loss});
    std::copy(model.branch.params().begin(), model.branch.params().end(), theta.begin());
    std::copy(model.trunk.raw().begin(), model.trunk.raw().end(), theta.begin() + static_cast<std::ptrdiff_t>(nb));
    theta.back() = model.bias;
    adam.step(theta, grad, lr);
    std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(nb), model.branch.params().begin());
    std::copy(theta.begin() + static_cast<std::ptrdiff_t>(nb), theta.begin() + static_cast<std::ptrdiff_t>(nb + nt),
              model.trunk.raw().begin());
    model.bias = theta.back();
    if (!trunk_centers_inside(model.trunk)) res.centers_inside = false;
  }
  res.train_mse = deeponet_mse(model, train, opt.threads);
  if (test) res.test_mse = deeponet_mse(model, *test, opt.threads);
  return res;
}

}  // namespace bumpnet
