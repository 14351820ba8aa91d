// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--quick] [--configs dir] [--out dir] [--threads n] [--only 1,4,...]
//
// --quick evaluates the property checks only (criteria 1-3, the property
// parts of 6 and 7, and 8); the training bands of 4-7 need the full run.
// Exit status is 0 when every evaluated criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bumpnet/assembly.hpp"
#include "bumpnet/bench.hpp"
#include "bumpnet/compiled.hpp"
#include "bumpnet/diffeng.hpp"
#include "bumpnet/fd_solver.hpp"
#include "bumpnet/geometry.hpp"

using namespace bumpnet;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "" : "FAILED: ") + what);
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Geometry

BumpGeometry random_geometry(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> c(-2.0, 2.0), l(0.1, 3.0), a(-2.0, 2.0), p(0.5, 10.0);
  BumpGeometry g;
  for (std::size_t j = 0; j < n; ++j) {
    g.center.push_back(c(rng));
    g.sides.push_back(l(rng));
  }
  for (std::size_t j = 0; j + 1 < n; ++j) g.rotation.push_back(a(rng));
  g.sharpness = p(rng);
  g.height = c(rng);
  return g;
}

double closed_form_2d(double x1, double x2, double a, double c1, double c2, double l1, double l2, double p) {
  const double r = std::sqrt(a * a + 1.0);
  const double s1 = -c1 - a * c2 + r * l1 / 2.0;
  const double s2 = a * c1 - c2 + r * l2 / 2.0;
  const double sb1 = c1 + a * c2 + r * l1 / 2.0;
  const double sb2 = -a * c1 + c2 + r * l2 / 2.0;
  const double inner = std::tanh(p * (x1 + a * x2 + s1)) + std::tanh(p * (-a * x1 + x2 + s2)) +
                       std::tanh(p * (-x1 - a * x2 + sb1)) + std::tanh(p * (a * x1 - x2 + sb2)) - 3.0;
  return 0.5 * (1.0 + std::tanh(p * inner));
}

Outcome criterion_geometry() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (std::size_t n : {2u, 3u, 4u})
    for (int k = 0; k < 1000; ++k) {
      const auto g = random_geometry(rng, n);
      const auto back = biases_to_geometry(geometry_to_biases(g));
      for (std::size_t j = 0; j < n; ++j) {
        worst = std::max(worst, std::abs(back.center[j] - g.center[j]) / std::max(1.0, std::abs(g.center[j])));
        worst = std::max(worst, std::abs(back.sides[j] - g.sides[j]) / g.sides[j]);
      }
    }
  o.check(worst <= 1e-10, "geometry<->biases round trip on 3000 bumps, worst rel " + fmt("%.2e", worst));

  bool frames = true;
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const double a = u(rng);
    const auto b = gram_schmidt_frame(std::vector<double>{a});
    const double e2[4] = {1.0, a, -a, 1.0};
    for (int i = 0; i < 4; ++i) frames = frames && std::abs(b[i] - e2[i]) <= 1e-14 * (1 + a * a);
    const double a1 = u(rng), a2 = u(rng);
    const auto c = gram_schmidt_frame(std::vector<double>{a1, a2});
    const double e3[9] = {1.0, a1, a2, -a1, a2 * a2 + 1.0, -a1 * a2, -a2, 0.0, 1.0};
    const double s = 1.0 + a1 * a1 + a2 * a2;
    for (int i = 0; i < 9; ++i) frames = frames && std::abs(c[i] - e3[i]) <= 1e-14 * s * s;
  }
  o.check(frames, "Gram-Schmidt frames match the 2D and 3D closed forms");

  const BoundingBox box = BoundingBox::cube(2, -3.0, 3.0);
  double eval_err = 0.0;
  std::uniform_real_distribution<double> x(-3.0, 3.0);
  for (int k = 0; k < 1000; ++k) {
    auto g = random_geometry(rng, 2);
    for (auto& c : g.center) c = std::clamp(c, -2.5, 2.5);
    const auto m = model_from_geometry({g}, box);
    const auto mg = m.geometry(0);
    const std::vector<double> pt{x(rng), x(rng)};
    const double ref = closed_form_2d(pt[0], pt[1], mg.rotation[0], mg.center[0], mg.center[1], mg.sides[0],
                                      mg.sides[1], mg.sharpness);
    eval_err = std::max(eval_err, std::abs(eval_bump(m, 0, pt) - ref));
  }
  o.check(eval_err <= 1e-12, "generic evaluator vs 2D closed form at 1000 points, max err " + fmt("%.2e", eval_err));
  const double t = seconds(t0);
  o.check(t < 5.0, "runtime " + fmt("%.2f", t) + " s (< 5 s)");
  return o;
}

// ---------------------------------------------------------------------------
// 2. Differentiation

BumpNetModel random_model(std::mt19937_64& rng, std::vector<std::size_t> counts, const BoundingBox& box) {
  auto m = init_grid(counts, box);
  std::normal_distribution<double> nrm(0.0, 0.3);
  for (auto& r : m.raw()) r += nrm(rng);
  return m;
}

/// d(output)/d(raw) through the adjoint kernel, output selected by the seed.
std::vector<double> adjoint_gradient(const BumpNetModel& m, const std::vector<double>& x, const PointJet& seed) {
  const CompiledModel cm(m, true);
  PointEvaluator ev(cm, true);
  ev.eval(0, 2, x.data());
  ev.seed(0, 2, x.data(), seed);
  std::vector<double> g(m.parameter_count(), 0.0);
  cm.chain_to_raw(ev.frame_adj(), ev.amp_adj(), g);
  return g;
}

Outcome criterion_differentiation() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const auto box = BoundingBox::cube(2, 0.0, 1.0);
  double spatial = 0.0, grad = 0.0, nested = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    auto m = random_model(rng, {2, 2}, box);
    const std::vector<double> x{u(rng), u(rng)};
    const double h = 1e-4;
    for (std::size_t axis : {0u, 1u}) {
      const auto d = spatial_derivs(m, x, axis);
      auto at = [&](double off) {
        auto y = x;
        y[axis] += off;
        return eval_model(m, y);
      };
      const double d1 = (at(h) - at(-h)) / (2 * h);
      const double d2 = (at(h) - 2 * at(0) + at(-h)) / (h * h);
      spatial = std::max(spatial, std::abs(d.du - d1) / std::max(std::abs(d1), 1.0));
      spatial = std::max(spatial, std::abs(d.d2u - d2) / std::max(std::abs(d2), 1.0));
    }
    PointJet s0;
    s0.u = 1.0;
    const auto g = adjoint_gradient(m, x, s0);
    const double ht = 1e-6;
    for (std::size_t r = 0; r < m.parameter_count(); ++r) {
      const double keep = m.raw()[r];
      m.raw()[r] = keep + ht;
      const double fp = eval_model(m, x);
      m.raw()[r] = keep - ht;
      const double fm = eval_model(m, x);
      m.raw()[r] = keep;
      const double fd = (fp - fm) / (2 * ht);
      grad = std::max(grad, std::abs(g[r] - fd) / std::max(std::abs(fd), 1e-2));
    }
    for (std::size_t axis : {0u, 1u}) {
      PointJet s2;
      s2.d2u[axis] = 1.0;
      const auto gn = adjoint_gradient(m, x, s2);
      auto uxx = [&](const BumpNetModel& mm) {
        const double hx = 1e-3;
        auto xp = x, xm = x;
        xp[axis] += hx;
        xm[axis] -= hx;
        return (eval_model(mm, xp) - 2 * eval_model(mm, x) + eval_model(mm, xm)) / (hx * hx);
      };
      const double hp = 1e-4;
      for (std::size_t r = 0; r < m.parameter_count(); ++r) {
        const double keep = m.raw()[r];
        m.raw()[r] = keep + hp;
        const double fp = uxx(m);
        m.raw()[r] = keep - hp;
        const double fm = uxx(m);
        m.raw()[r] = keep;
        const double fd = (fp - fm) / (2 * hp);
        nested = std::max(nested, std::abs(gn[r] - fd) / std::max(std::abs(fd), 1.0));
      }
    }
  }
  o.check(spatial <= 1e-4, "spatial u_x, u_xx vs central differences, worst rel " + fmt("%.2e", spatial));
  o.check(grad <= 1e-4, "parameter gradient vs central differences, worst rel " + fmt("%.2e", grad));
  o.check(nested <= 1e-3, "gradient of u_xx vs nested differences, worst rel " + fmt("%.2e", nested));
  const double t = seconds(t0);
  o.check(t < 30.0, "runtime " + fmt("%.2f", t) + " s (< 30 s)");
  return o;
}

// ---------------------------------------------------------------------------
// 3. Parameter counts

Outcome criterion_counts() {
  Outcome o;
  auto count = [](std::vector<std::size_t> c, bool heights) {
    return init_grid(c, BoundingBox::cube(2, 0.0, 1.0), heights).parameter_count();
  };
  o.check(count({6, 6}, true) == 252, "6x6 -> " + std::to_string(count({6, 6}, true)) + " (252)");
  o.check(count({20, 6}, true) == 840, "20x6 -> " + std::to_string(count({20, 6}, true)) + " (840)");
  o.check(count({2, 11}, true) == 154, "2x11 -> " + std::to_string(count({2, 11}, true)) + " (154)");
  o.check(count({10, 10}, false) == 600, "height-free 10x10 -> " + std::to_string(count({10, 10}, false)) + " (600)");
  return o;
}

// ---------------------------------------------------------------------------
// 4. PINN benchmarks

struct Band {
  std::string config;
  double bound;
  double reference;
};

Outcome criterion_pinn(const fs::path& configs, const fs::path& out, std::size_t threads) {
  Outcome o;
  const std::vector<Band> bands{{"poisson", 8.66e-3, 8.66e-4},
                                {"heat", 1.83e-2, 1.83e-3},
                                {"helmholtz", 2.66e-1, 2.66e-2},
                                {"advection_sa", 2.3e-2, 2.3e-3}};
  for (const auto& b : bands) {
    const auto j = read_json_file((configs / (b.config + ".json")).string());
    const auto dir = out / "criterion4" / b.config;
    std::printf("  running %s ...\n", b.config.c_str());
    std::fflush(stdout);
    const auto r = run_pinn_benchmark(j, dir, threads);
    std::ostringstream s;
    s << b.config << " rel-L1 " << fmt("%.3e", r.rel_l1) << " (<= " << fmt("%.3g", b.bound) << ", reference "
      << fmt("%.3g", b.reference) << "), " << r.epochs << " epochs, " << fmt("%.0f", r.wall_seconds) << " s";
    if (!r.ok()) s << ", run failed: " << r.message;
    const bool ok = r.ok() && r.rel_l1 <= b.bound && r.wall_seconds <= 1800.0;
    if (!ok) s << "; trace " << (dir / "trace.csv").string();
    o.check(ok, s.str());
  }
  return o;
}

// ---------------------------------------------------------------------------
// 5. Pruning study

Outcome criterion_pruning(const fs::path& configs, const fs::path& out, std::size_t threads) {
  Outcome o;
  const auto j = read_json_file((configs / "pruning.json").string());
  auto jb = j;
  jb["prune"] = Json{{"mode", "none"}};
  jb["name"] = j.value("name", std::string("pruning")) + "-baseline";
  const auto pruned_cfg = parse_pinn_config(j);
  std::printf("  running pruned and baseline Helmholtz ...\n");
  std::fflush(stdout);
  auto run = [&](const Json& cfg_json, const fs::path& dir) {
    prepare_run_dir(dir, cfg_json);
    auto r = run_pinn(parse_pinn_config(cfg_json), threads, config_hash(cfg_json));
    r.trace.write_csv((dir / "trace.csv").string());
    write_record(dir, r.record);
    return r;
  };
  const auto pruned = run(j, out / "criterion5" / "pruned");
  const auto base = run(jb, out / "criterion5" / "baseline");
  if (!pruned.record.ok() || !base.record.ok()) {
    o.check(false, "training failed: " + pruned.record.message + base.record.message);
    return o;
  }
  const auto& pt = pruned.trace;
  o.check(pt.prune_steps.size() == pruned_cfg.train.prune.rounds,
          std::to_string(pt.prune_steps.size()) + " prune rounds, bumps " +
              std::to_string(pt.rows.front().bump_count) + " -> " + std::to_string(pt.rows.back().bump_count));
  o.check(pt.final_loss() <= base.trace.final_loss(), "final loss pruned " + fmt("%.3e", pt.final_loss()) +
                                                          " vs baseline " + fmt("%.3e", base.trace.final_loss()) +
                                                          " after " + std::to_string(pt.rows.size()) + " steps");
  std::size_t spikes = 0;
  std::string ratios;
  for (std::size_t s : pt.prune_steps) {
    const double before = pt.rows[s].total, after = pt.rows[s + 1].total;
    if (after > before) ++spikes;
    ratios += (ratios.empty() ? "" : ", ") + fmt("%.2f", after / before);
  }
  o.check(spikes == pt.prune_steps.size(),
          "loss spike after " + std::to_string(spikes) + "/" + std::to_string(pt.prune_steps.size()) +
              " prunes (loss ratio after/before: " + ratios + ")");
  o.notes.push_back("rel-L1 pruned " + fmt("%.3e", pruned.record.rel_l1) + " vs baseline " +
                    fmt("%.3e", base.record.rel_l1));
  return o;
}

// ---------------------------------------------------------------------------
// 6. EDNN

void ednn_properties(Outcome& o, const EdnnResult& res, double tolerance) {
  double bc = 0.0;
  for (const auto& e : res.errors) bc = std::max(bc, e.boundary);
  o.check(bc <= 1e-12, "max |u| on the boundary over " + std::to_string(res.errors.size()) + " output times " +
                           fmt("%.2e", bc) + " (<= 1e-12)");
  bool frozen = res.initial_model.bump_count() == res.model.bump_count();
  for (std::size_t i = 0; frozen && i < res.model.bump_count(); ++i) {
    const auto a = res.initial_model.block(i), b = res.model.block(i);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (k != res.model.layout().height_offset() && std::memcmp(&a[k], &b[k], sizeof(double)) != 0) frozen = false;
  }
  o.check(res.evolving_parameters == 36 && frozen, std::to_string(res.evolving_parameters) +
                                                       " evolving parameters, shape parameters bitwise frozen: " +
                                                       (frozen ? "yes" : "no"));
  o.check(res.worst_certificate <= tolerance, "least-squares certificate " + fmt("%.2e", res.worst_certificate));
}

bool rk3_slope(Outcome& o) {
  std::vector<double> dts{0.1, 0.05, 0.025}, errs;
  for (double dt : dts) {
    Eigen::VectorXd y = Eigen::VectorXd::Ones(1);
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < n; ++k) y = rk3_step(y, dt, [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return -v; });
    errs.push_back(std::abs(y(0) - std::exp(-1.0)));
  }
  const double s1 = std::log2(errs[0] / errs[1]), s2 = std::log2(errs[1] / errs[2]);
  const bool ok = std::abs(s1 - 3.0) <= 0.2 && std::abs(s2 - 3.0) <= 0.2;
  o.check(ok, "RK3 slopes on y' = -y: " + fmt("%.3f", s1) + ", " + fmt("%.3f", s2));
  return ok;
}

EdnnConfig small_ednn() {
  EdnnConfig c;
  c.fit.epochs = 300;
  c.fit_points_per_axis = 24;
  c.error_resolution = 41;
  c.snapshot_times = {};
  c.end_time = 0.05;
  c.output_every = 5;
  return c;
}

Outcome criterion_ednn(bool quick, const fs::path& configs, const fs::path& out, std::size_t threads) {
  Outcome o;
  rk3_slope(o);
  if (quick) {
    ednn_properties(o, solve_heat2d(small_ednn()), 1e-4);
    o.notes.push_back("t = 1 error band not evaluated (quick mode)");
    return o;
  }
  const auto j = read_json_file((configs / "ednn_heat.json").string());
  std::printf("  running EDNN heat ...\n");
  std::fflush(stdout);
  const auto cfg = parse_ednn_config(j);
  const auto dir = out / "criterion6";
  prepare_run_dir(dir, j);
  const auto run = run_ednn(cfg, threads, config_hash(j));
  write_ednn_artifacts(run, dir);
  if (!run.finished) {
    o.check(false, "EDNN run failed: " + run.record.message);
    return o;
  }
  const auto& res = run.result;
  const double t_end = res.errors.back().time;
  o.check(std::abs(t_end - 1.0) < 1e-9 && run.record.rel_l2 <= 5e-3,
          "rel-L2 at t = " + fmt("%.3f", t_end) + ": " + fmt("%.3e", run.record.rel_l2) +
              " (<= 5e-3, reference 5e-4); IC fit MSE " + fmt("%.2e", res.ic_mse) + ", " +
              fmt("%.0f", run.record.wall_seconds) + " s; errors " + (dir / "errors.csv").string());
  ednn_properties(o, res, cfg.ednn.tolerance);
  return o;
}

// ---------------------------------------------------------------------------
// 7. Operator learning

void fd_oracle(Outcome& o) {
  auto f = [](double x) { return std::sin(pi * x) + 3 * x * (1 - x) * std::cos(2 * x); };
  const std::size_t nt = 200;
  const auto ref = fd_solve_rd(f, {1600, nt});
  std::vector<double> err;
  for (std::size_t nx : {25, 50, 100}) {
    const auto sol = fd_solve_rd(f, {nx, nt});
    double e = 0.0;
    for (std::size_t i = 0; i <= nx; ++i) e = std::max(e, std::abs(sol.at(i, nt) - ref.at(i * (1600 / nx), nt)));
    err.push_back(e);
  }
  const double p1 = std::log2(err[0] / err[1]), p2 = std::log2(err[1] / err[2]);
  o.check(p1 >= 1.9 && p1 <= 2.2 && p2 >= 1.9 && p2 <= 2.2,
          "FD spatial order " + fmt("%.3f", p1) + ", " + fmt("%.3f", p2) + " (2 +- 0.1)");
  const ReactionDiffusion pde{0.01, 0.0, 1.0};
  const auto sol = fd_solve_rd([](double x) { return std::sin(pi * x); }, {100, 100}, pde);
  const double a = pde.diffusion * pi * pi;
  const double exact = (1 - std::exp(-a)) / a;
  const double rel = std::abs(sol.interpolate(0.5, 1.0) - exact) / exact;
  o.check(rel <= 1e-4, "FD linear limit u(0.5, 1) rel err " + fmt("%.2e", rel));
}

Outcome criterion_operator(bool quick, const fs::path& configs, const fs::path& out, std::size_t threads) {
  Outcome o;
  fd_oracle(o);
  if (quick) {
    DatasetSpec s;
    s.functions = 8;
    s.points = 20;
    s.grid = {50, 50};
    const auto data = generate_dataset(s);
    auto m = make_deeponet({}, 1);
    DeepOnetTrainOptions opt;
    opt.steps = 100;
    opt.batch_functions = 4;
    opt.schedule.initial = 1e-2;
    const auto r = train_deeponet(m, data, nullptr, opt);
    o.check(r.centers_inside, "trunk centers inside the domain over 100 steps");
    o.check(m.trunk.parameter_count() == 600, "trunk parameters " + std::to_string(m.trunk.parameter_count()));
    o.notes.push_back("test MSE band not evaluated (quick mode)");
    return o;
  }
  const auto j = read_json_file((configs / "deeponet.json").string());
  std::printf("  running DeepONet ...\n");
  std::fflush(stdout);
  const auto dir = out / "criterion7";
  const auto r = run_deeponet_job(j, dir, "", threads);
  o.check(r.mse <= 8.12e-5 && r.ok(), "test MSE " + fmt("%.3e", r.mse) + " (<= 8.12e-5, reference 8.12e-6), rel-L2 " +
                                          fmt("%.3e", r.rel_l2) + ", " + fmt("%.0f", r.wall_seconds) + " s; trace " +
                                          (dir / "trace.csv").string());
  o.check(r.message != "a trunk center left the domain", "trunk centers inside the domain at every step");
  return o;
}

// ---------------------------------------------------------------------------
// 8. Property fallback

Outcome criterion_fallback(const std::vector<const Outcome*>& parts) {
  Outcome o;
  bool all = true;
  for (const auto* p : parts) all = all && p->pass;
  o.check(all, "criteria 1-3, EDNN boundary/convergence checks and FD oracle checks");

  const auto j = Json::parse(R"({"command": "train-pinn", "name": "det", "problem": "poisson", "seed": 3,
     "model": {"counts": [3, 3]}, "optimizer": {"epochs": 60, "lr": 0.05},
     "sampling": {"interior": 80, "boundary": 10}, "sa": {"enabled": true}, "eval_resolution": 32})");
  const auto cfg = parse_pinn_config(j);
  const auto a = run_pinn(cfg, 1, config_hash(j)), b = run_pinn(cfg, 3, config_hash(j));
  auto strip = [](MetricsRecord r) {
    r.wall_seconds = 0.0;
    return r.csv_row();
  };
  o.check(strip(a.record) == strip(b.record) && checkpoint_text(a.model) == checkpoint_text(b.model),
          "PINN run: identical record and checkpoint for 1 and 3 threads");

  auto e = small_ednn();
  e.end_time = 0.01;
  const auto ea = solve_heat2d(e);
  e.threads = 2;
  const auto eb = solve_heat2d(e);
  o.check(ea.model == eb.model && ea.errors.back().rel_l2 == eb.errors.back().rel_l2, "EDNN run: identical result");

  DatasetSpec s;
  s.functions = 6;
  s.points = 10;
  s.grid = {40, 40};
  const auto d1 = generate_dataset(s), d2 = generate_dataset(s);
  DeepOnetArchitecture arch;
  arch.trunk_counts = {4, 4};
  arch.branch_widths = {100, 20, 16};
  auto m1 = make_deeponet(arch, 2), m2 = make_deeponet(arch, 2);
  DeepOnetTrainOptions opt;
  opt.steps = 20;
  opt.batch_functions = 3;
  const auto r1 = train_deeponet(m1, d1, nullptr, opt);
  opt.threads = 2;
  const auto r2 = train_deeponet(m2, d2, nullptr, opt);
  o.check(d1.values == d2.values && m1 == m2 && r1.train_mse == r2.train_mse,
          "dataset and DeepONet training: identical result");
  return o;
}

void print(int id, const std::string& title, const Outcome& o) {
  std::printf("%s  %d  %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str());
  for (const auto& n : o.notes) std::printf("        %s\n", n.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  bool quick = false;
  std::string configs = BUMPNET_CONFIG_DIR, out = "acceptance_runs", only;
  std::size_t threads = 1;
  app.add_flag("--quick", quick, "property checks only");
  app.add_option("--configs", configs, "directory with the benchmark configurations");
  app.add_option("--out", out, "directory for run artifacts");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "comma-separated criteria to run");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  {
    std::stringstream ss(only);
    std::string item;
    while (std::getline(ss, item, ',')) selected.insert(std::stoi(item));
  }
  auto want = [&](int id) { return selected.empty() || selected.count(id); };

  bool all = true;
  try {
    Outcome c1, c2, c3, c6, c7;
    auto record = [&](int id, const std::string& title, const Outcome& o) {
      print(id, title, o);
      all = all && o.pass;
    };
    if (want(1) || want(8)) record(1, "geometry suite", c1 = criterion_geometry());
    if (want(2) || want(8)) record(2, "differentiation suite", c2 = criterion_differentiation());
    if (want(3) || want(8)) record(3, "parameter-count identities", c3 = criterion_counts());
    if (want(4)) {
      if (quick) std::printf("SKIP  4  PINN benchmark bands (full run only)\n");
      else record(4, "PINN benchmark bands", criterion_pinn(configs, out, threads));
    }
    if (want(5)) {
      if (quick) std::printf("SKIP  5  pruning study (full run only)\n");
      else record(5, "pruning study", criterion_pruning(configs, out, threads));
    }
    if (want(6) || want(8))
      record(6, quick ? "EDNN heat (properties)" : "EDNN heat", c6 = criterion_ednn(quick, configs, out, threads));
    if (want(7) || want(8))
      record(7, quick ? "operator learning (oracles)" : "operator learning",
             c7 = criterion_operator(quick, configs, out, threads));
    if (want(8)) {
      // Only the property parts of 6 and 7 count here.
      Outcome p6, p7;
      for (const auto& n : c6.notes)
        if (n.find("rel-L2 at t") == std::string::npos) p6.check(n.rfind("FAILED", 0) != 0, n);
      for (const auto& n : c7.notes)
        if (n.find("test MSE") == std::string::npos) p7.check(n.rfind("FAILED", 0) != 0, n);
      record(8, "property fallback", criterion_fallback({&c1, &c2, &c3, &p6, &p7}));
    }
  } catch (const std::exception& e) {
    std::printf("FAIL  -  aborted: %s\n", e.what());
    return 1;
  }
  return all ? 0 : 1;
}
