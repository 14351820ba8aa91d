#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "bumpnet/deeponet.hpp"

namespace bumpnet {
namespace {

constexpr double pi = std::numbers::pi;

TEST(Mlp, ParameterCount) {
  EXPECT_EQ(Mlp::count({100, 50, 50, 100}), 101u * 50 + 51 * 50 + 51 * 100);
  const Mlp net({3, 4, 2}, 1);
  EXPECT_EQ(net.parameter_count(), 4u * 4 + 5 * 2);
  EXPECT_THROW(Mlp({3}, 1), ValidationError);
  EXPECT_THROW(Mlp({3, 2}, std::vector<double>(5)), ValidationError);
}

TEST(Mlp, GlorotBoundsAndZeroBiases) {
  const Mlp net({30, 20, 10}, 7);
  const auto p = net.params();
  const double a1 = std::sqrt(6.0 / 50.0), a2 = std::sqrt(6.0 / 30.0);
  for (std::size_t k = 0; k < 600; ++k) EXPECT_LE(std::abs(p[k]), a1);
  for (std::size_t k = 600; k < 620; ++k) EXPECT_EQ(p[k], 0.0);
  for (std::size_t k = 620; k < 820; ++k) EXPECT_LE(std::abs(p[k]), a2);
  for (std::size_t k = 820; k < 830; ++k) EXPECT_EQ(p[k], 0.0);
  EXPECT_TRUE(Mlp({30, 20, 10}, 7) == net);
  EXPECT_FALSE(Mlp({30, 20, 10}, 8) == net);
}

TEST(Mlp, ForwardMatchesHandComputation) {
  // 2 -> 2 (tanh) -> 1
  const Mlp net({2, 2, 1}, std::vector<double>{0.5, -1.0, 2.0, 0.25, 0.1, -0.2, 1.5, -3.0, 0.7});
  const std::vector<double> x{0.3, -0.4};
  const double h0 = std::tanh(0.5 * 0.3 - 1.0 * -0.4 + 0.1);
  const double h1 = std::tanh(2.0 * 0.3 + 0.25 * -0.4 - 0.2);
  EXPECT_DOUBLE_EQ(net(x)[0], 1.5 * h0 - 3.0 * h1 + 0.7);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  Mlp net({4, 6, 5, 3}, 11);
  const std::vector<double> x{0.2, -0.7, 1.1, 0.4}, w{0.3, -1.2, 0.8};
  auto objective = [&] {
    const auto y = net(x);
    return w[0] * y[0] + w[1] * y[1] + w[2] * y[2];
  };
  Mlp::Workspace ws;
  net.forward(x, ws);
  std::vector<double> g(net.parameter_count(), 0.0);
  net.backward(ws, w, g);
  const double h = 1e-6;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double keep = net.params()[k];
    net.params()[k] = keep + h;
    const double fp = objective();
    net.params()[k] = keep - h;
    const double fm = objective();
    net.params()[k] = keep;
    EXPECT_NEAR(g[k], (fp - fm) / (2 * h), 1e-7 * std::max(1.0, std::abs(g[k]))) << "parameter " << k;
  }
}

TEST(Grf, KernelValues) {
  const GrfSampler grf;
  for (double x : grf.sensors()) EXPECT_EQ(grf.kernel(x, x), 1.0);
  EXPECT_NEAR(grf.kernel(0.1, 0.3), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(grf.kernel(0.3, 0.1), 0.6065306597126334, 1e-15);
  EXPECT_EQ(grf.sensor_count(), 100u);
  EXPECT_EQ(grf.sensors().front(), 0.0);
  EXPECT_EQ(grf.sensors().back(), 1.0);
  EXPECT_GE(grf.jitter(), 1e-10);
  EXPECT_LE(grf.jitter(), 1e-4);
}

TEST(Grf, SameSeedSameSamples) {
  const GrfSampler grf;
  EXPECT_EQ(grf.sample(5, 42), grf.sample(5, 42));
  EXPECT_NE(grf.sample(5, 42), grf.sample(5, 43));
}

TEST(Grf, EmpiricalCovarianceMatchesKernel) {
  const GrfSampler grf;
  const std::size_t draws = 100000, m = grf.sensor_count();
  const auto s = grf.sample(draws, 5);
  std::vector<double> mean(m, 0.0), cov(m * m, 0.0);
  for (std::size_t r = 0; r < draws; ++r) {
    const double* f = s.data() + r * m;
    for (std::size_t i = 0; i < m; ++i) {
      mean[i] += f[i];
      for (std::size_t j = i; j < m; ++j) cov[i * m + j] += f[i] * f[j];
    }
  }
  double worst = 0.0, worst_mean = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    worst_mean = std::max(worst_mean, std::abs(mean[i] / draws));
    for (std::size_t j = i; j < m; ++j) {
      const double c = cov[i * m + j] / draws - (mean[i] / draws) * (mean[j] / draws);
      worst = std::max(worst, std::abs(c - grf.kernel(grf.sensors()[i], grf.sensors()[j])));
    }
  }
  EXPECT_LT(worst, 0.02);
  EXPECT_LT(worst_mean, 0.02);
}

TEST(FdSolver, ZeroForcingGivesZero) {
  const auto sol = fd_solve_rd([](double) { return 0.0; }, {50, 40});
  for (double v : sol.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(sol.values.size(), 51u * 41);
}

TEST(FdSolver, LinearLimitMatchesSingleModeSolution) {
  // k = 0, f = sin(pi x): u = sin(pi x) (1 - exp(-D pi^2 t)) / (D pi^2)
  const ReactionDiffusion pde{0.01, 0.0, 1.0};
  const auto sol = fd_solve_rd([](double x) { return std::sin(pi * x); }, {100, 100}, pde);
  const double a = pde.diffusion * pi * pi;
  const double exact = (1 - std::exp(-a)) / a;
  EXPECT_NEAR(sol.at(50, 100), exact, 0.01 * exact);
  EXPECT_NEAR(sol.interpolate(0.5, 1.0), exact, 1e-4 * exact);
  // The steady state is approached as t grows.
  const auto late = fd_solve_rd([](double x) { return std::sin(pi * x); }, {100, 2000}, {0.01, 0.0, 2000.0});
  EXPECT_NEAR(late.at(50, 2000), 1.0 / a, 1e-3 / a);
}

TEST(FdSolver, SecondOrderInSpace) {
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
  for (std::size_t k = 0; k + 1 < err.size(); ++k) {
    const double order = std::log2(err[k] / err[k + 1]);
    EXPECT_GE(order, 1.9) << "refinement " << k;
    EXPECT_LE(order, 2.2) << "refinement " << k;
  }
}

TEST(FdSolver, RefinementSelfConsistency) {
  const GrfSampler grf;
  const auto fs = grf.sample(3, 9);
  for (std::size_t r = 0; r < 3; ++r) {
    const std::span<const double> f(fs.data() + r * 100, 100);
    const FdGrid g;
    const auto coarse = fd_solve_rd(f, g);
    const auto fine = fd_solve_rd(f, {2 * g.nx, 2 * g.nt});
    double sq = 0.0, final_max = 0.0;
    for (std::size_t n = 0; n <= g.nt; ++n)
      for (std::size_t i = 0; i <= g.nx; ++i) {
        const double d = std::abs(coarse.at(i, n) - fine.at(2 * i, 2 * n));
        sq += d * d;
        if (n == g.nt) final_max = std::max(final_max, d);
      }
    EXPECT_LT(std::sqrt(sq / static_cast<double>((g.nx + 1) * (g.nt + 1))), 1e-4) << "forcing " << r;
    EXPECT_LT(final_max, 2e-4) << "forcing " << r;
  }
}

TEST(FdSolver, BlowUpIsReported) {
  EXPECT_THROW(fd_solve_rd([](double) { return 50.0; }, {20, 50}, {0.01, 10.0, 1.0}), NumericalError);
}

TEST(FdSolver, SensorInterpolation) {
  const std::vector<double> v{0.0, 1.0, 4.0};
  const auto f = sensor_interpolant(v);
  EXPECT_EQ(f(0.0), 0.0);
  EXPECT_EQ(f(0.5), 1.0);
  EXPECT_EQ(f(1.0), 4.0);
  EXPECT_DOUBLE_EQ(f(0.75), 2.5);
}

DeepOnetModel small_model(std::uint64_t seed) {
  DeepOnetArchitecture a;
  a.branch_widths = {6, 5, 4, 3};
  a.trunk_counts = {3, 1};
  auto m = make_deeponet(a, seed);
  m.bias = 0.15;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.2);
  for (double& r : m.trunk.raw()) r += n(rng);  // leave the symmetric initial grid
  return m;
}

TEST(DeepOnet, TrunkParameterCount) {
  const auto m = make_deeponet({}, 1);
  EXPECT_EQ(m.trunk.parameter_count(), 600u);
  EXPECT_EQ(m.trunk.bump_count(), 100u);
  EXPECT_EQ(m.branch.parameter_count(), Mlp::count({100, 50, 50, 100}));
  EXPECT_TRUE(trunk_centers_inside(m.trunk));
  DeepOnetArchitecture bad;
  bad.trunk_counts = {5, 5};
  EXPECT_THROW(make_deeponet(bad, 1), ValidationError);
}

TEST(DeepOnet, DotProductPlusBias) {
  auto m = small_model(2);
  const std::vector<double> f{0.1, -0.3, 0.5, 0.2, 0.0, -0.9}, x{0.4, 0.6};
  const CompiledModel cm(m.trunk);
  std::vector<double> b(3);
  cm.basis(x, b);
  const auto c = m.branch(f);
  const double expect = c[0] * b[0] + c[1] * b[1] + c[2] * b[2] + m.bias;
  EXPECT_NEAR(deeponet_forward(m, f, x), expect, 1e-14);
  for (double v : b) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(deeponet_forward(m, std::vector<double>(5), x), ValidationError);
  EXPECT_THROW(deeponet_forward(m, f, std::vector<double>{0.5}), ValidationError);
}

TEST(DeepOnet, SingleBasisProduct) {
  // p = 1: c = 2 and the basis value b give 2 b.
  const auto trunk = init_grid({1, 1}, BoundingBox::cube(2, 0.0, 1.0), false);
  const CompiledModel cm(trunk);
  const std::vector<double> x{0.5, 0.5}, c{2.0};
  std::vector<double> b(1), cache;
  cm.basis(x, b);
  EXPECT_DOUBLE_EQ(deeponet_combine(cm, c, 0.0, x.data(), cache), 2.0 * b[0]);
}

TEST(DeepOnet, ZeroBranchGivesBias) {
  auto m = small_model(3);
  for (double& p : m.branch.params()) p = 0.0;
  const std::vector<double> f{1, 2, 3, 4, 5, 6};
  for (double x0 : {0.1, 0.5, 0.9}) EXPECT_EQ(deeponet_forward(m, f, std::vector<double>{x0, 0.3}), m.bias);
}

TEST(DeepOnet, LinearInBranchOutput) {
  const auto m = small_model(4);
  const CompiledModel cm(m.trunk);
  std::vector<double> c{0.7, -1.3, 2.1}, c2(3), cache;
  for (int k = 0; k < 3; ++k) c2[k] = 2 * c[k];
  const std::vector<double> x{0.35, 0.8};
  const double v1 = deeponet_combine(cm, c, m.bias, x.data(), cache);
  const double v2 = deeponet_combine(cm, c2, m.bias, x.data(), cache);
  EXPECT_NEAR(v2 - v1, v1 - m.bias, 1e-14);
}

OperatorDataset tiny_dataset(std::size_t functions, std::size_t points, std::uint64_t seed, std::size_t sensors = 6) {
  DatasetSpec s;
  s.functions = functions;
  s.points = points;
  s.sensors = sensors;
  s.grid = {20, 20};
  s.seed = seed;
  return generate_dataset(s);
}

TEST(DeepOnet, GradientMatchesFiniteDifferences) {
  auto m = small_model(5);
  const auto data = tiny_dataset(3, 7, 1);
  const std::vector<std::size_t> fns{2, 0};
  std::vector<double> g(m.parameter_count(), 0.0);
  deeponet_loss(m, data, fns, g);
  const std::size_t nb = m.branch.parameter_count(), nt = m.trunk.parameter_count();
  auto param = [&](std::size_t k) -> double& {
    if (k < nb) return m.branch.params()[k];
    if (k < nb + nt) return m.trunk.raw()[k - nb];
    return m.bias;
  };
  const double h = 1e-6;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double keep = param(k);
    param(k) = keep + h;
    const double fp = deeponet_loss(m, data, fns, {});
    param(k) = keep - h;
    const double fm = deeponet_loss(m, data, fns, {});
    param(k) = keep;
    const double fd = (fp - fm) / (2 * h);
    EXPECT_NEAR(g[k], fd, 1e-4 * std::max(std::abs(fd), 1e-3)) << "parameter " << k;
  }
}

TEST(DeepOnet, DatasetPointsAreSolverNodes) {
  const auto d = tiny_dataset(2, 30, 7, 10);
  ASSERT_EQ(d.values.size(), 60u);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto sol = fd_solve_rd(d.f(k), d.spec.grid, d.spec.pde);
    for (std::size_t q = 0; q < 30; ++q) {
      const std::size_t r = k * 30 + q;
      const double x = d.queries[2 * r], t = d.queries[2 * r + 1];
      const auto i = static_cast<std::size_t>(std::lround(x * 20)), n = static_cast<std::size_t>(std::lround(t * 20));
      EXPECT_EQ(sol.at(i, n), d.values[r]);
    }
  }
  const auto again = tiny_dataset(2, 30, 7, 10);
  EXPECT_EQ(again.values, d.values);
  EXPECT_EQ(again.queries, d.queries);
}

TEST(DeepOnet, DatasetFileRoundTrip) {
  const auto d = tiny_dataset(3, 5, 8);
  const auto path = (std::filesystem::temp_directory_path() / "bumpnet_dataset_test.txt").string();
  save_dataset(d, path);
  const auto back = load_dataset(path);
  EXPECT_EQ(back.forcing, d.forcing);
  EXPECT_EQ(back.queries, d.queries);
  EXPECT_EQ(back.values, d.values);
  EXPECT_EQ(back.spec.grid.nx, 20u);
  EXPECT_EQ(back.spec.seed, 8u);
  EXPECT_EQ(back.spec.pde.diffusion, 0.01);
  std::FILE* fh = std::fopen(path.c_str(), "w");
  std::fputs("something else\n", fh);
  std::fclose(fh);
  EXPECT_THROW(load_dataset(path), ValidationError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_dataset(path), ValidationError);
}

TEST(DeepOnet, MemorizesOneForcing) {
  DatasetSpec spec;
  spec.functions = 1;
  spec.points = 500;
  spec.seed = 3;
  const auto data = generate_dataset(spec);
  auto m = make_deeponet({}, 6);
  DeepOnetTrainOptions opt;
  opt.steps = 3000;
  opt.batch_functions = 1;
  opt.schedule.initial = 3e-3;
  const double before = deeponet_mse(m, data);
  const auto res = train_deeponet(m, data, nullptr, opt);
  EXPECT_LT(res.train_mse, 1e-4);
  EXPECT_LT(res.train_mse, 1e-3 * before);
  EXPECT_TRUE(res.centers_inside);
}

TEST(DeepOnet, TrainingIsDeterministicAcrossThreads) {
  const auto data = tiny_dataset(6, 20, 4);
  DeepOnetArchitecture a;
  a.branch_widths = {6, 8, 4};
  a.trunk_counts = {2, 2};
  auto m1 = make_deeponet(a, 1), m2 = m1;
  const double before = deeponet_mse(m1, data);
  DeepOnetTrainOptions opt;
  opt.steps = 30;
  opt.batch_functions = 4;
  const auto r1 = train_deeponet(m1, data, &data, opt);
  opt.threads = 3;
  const auto r2 = train_deeponet(m2, data, &data, opt);
  EXPECT_TRUE(m1 == m2);
  EXPECT_EQ(r1.test_mse, r2.test_mse);
  EXPECT_LT(r1.train_mse, before);
}

}  // namespace
}  // namespace bumpnet
