#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "bumpnet/ednn.hpp"

using namespace bumpnet;

namespace {

constexpr double pi = std::numbers::pi;

const BoundingBox kHeatBox = BoundingBox::cube(2, -pi, pi);

double scalar_error(double dt) {
  Eigen::VectorXd y(1);
  y(0) = 1.0;
  const auto n = static_cast<int>(std::lround(1.0 / dt));
  for (int k = 0; k < n; ++k) y = rk3_step(y, dt, [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return -v; });
  return std::abs(y(0) - std::exp(-1.0));
}

EdnnConfig small_config() {
  EdnnConfig c;
  c.fit.epochs = 300;
  c.fit.schedule.initial = 0.02;
  c.fit_points_per_axis = 24;
  c.error_resolution = 41;
  c.snapshot_resolution = 9;
  c.end_time = 0.05;
  c.output_every = 5;
  return c;
}

std::vector<double> shape_params(const BumpNetModel& m) {
  std::vector<double> s;
  for (std::size_t i = 0; i < m.bump_count(); ++i) {
    const auto b = m.block(i);
    for (std::size_t k = 0; k < b.size(); ++k)
      if (k != m.layout().height_offset()) s.push_back(b[k]);
  }
  return s;
}

}  // namespace

TEST(Rk3, ZeroRhsLeavesStateUnchanged) {
  Eigen::VectorXd y(3);
  y << 1.0, -2.0, 0.5;
  const auto out = rk3_step(y, 0.3, [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(v.size()); });
  EXPECT_EQ(out, y);
}

TEST(Rk3, OneStepOfDecay) {
  Eigen::VectorXd y(1);
  y(0) = 1.0;
  const auto out = rk3_step(y, 0.1, [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return -v; });
  EXPECT_LT(std::abs(out(0) - std::exp(-0.1)), 5e-6);
}

TEST(Rk3, ThirdOrderConvergence) {
  std::vector<double> dts{0.1, 0.05, 0.025, 0.0125}, errs;
  for (double dt : dts) errs.push_back(scalar_error(dt));
  for (std::size_t k = 1; k < dts.size(); ++k) {
    const double slope = std::log(errs[k - 1] / errs[k]) / std::log(dts[k - 1] / dts[k]);
    EXPECT_NEAR(slope, 3.0, 0.2) << "dt " << dts[k];
  }
}

TEST(Rk3, RejectsBadSteps) {
  Eigen::VectorXd y = Eigen::VectorXd::Ones(1);
  auto f = [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v; };
  EXPECT_THROW(rk3_step(y, 0.0, f), ValidationError);
  auto blow = [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v * 1e308; };
  EXPECT_THROW(rk3_step(y, 1.0, blow), NumericalError);
}

TEST(Distance, VanishesOnBoundaryPositiveInside) {
  const SineDistance d{kHeatBox};
  for (double t : {-pi, -1.0, 0.0, 2.5, pi}) {
    const double a[2] = {-pi, t}, b[2] = {pi, t}, c[2] = {t, -pi}, e[2] = {t, pi};
    EXPECT_LT(std::abs(d(a).d), 1e-15);
    EXPECT_LT(std::abs(d(b).d), 1e-15);
    EXPECT_LT(std::abs(d(c).d), 1e-15);
    EXPECT_LT(std::abs(d(e).d), 1e-15);
  }
  const double mid[2] = {0.0, 0.0};
  EXPECT_NEAR(d(mid).d, 1.0, 1e-15);
  const double p[2] = {0.3, -2.9};
  EXPECT_GT(d(p).d, 0.0);
  EXPECT_NEAR(d(p).d, std::sin((0.3 + pi) / 2) * std::sin((-2.9 + pi) / 2), 1e-15);
}

TEST(Distance, DerivativesMatchFiniteDifferences) {
  const SineDistance d{kHeatBox};
  const double x[2] = {0.7, -1.3};
  const auto v = d(x);
  const double h = 1e-4;
  for (int j = 0; j < 2; ++j) {
    double xp[2] = {x[0], x[1]}, xm[2] = {x[0], x[1]};
    xp[j] += h;
    xm[j] -= h;
    EXPECT_NEAR(v.d1[j], (d(xp).d - d(xm).d) / (2 * h), 1e-7);
    EXPECT_NEAR(v.d2[j], (d(xp).d - 2 * v.d + d(xm).d) / (h * h), 1e-6);
  }
}

TEST(FrozenBasis, ConsistentSystemSolvedExactly) {
  const auto m = init_grid({3, 3}, kHeatBox);
  const FrozenBasis basis(m, SineDistance{kHeatBox}, cell_centred_grid(kHeatBox, {8, 8}));
  Eigen::VectorXd g(9);
  for (int i = 0; i < 9; ++i) g(i) = 0.1 * i - 0.3;
  const Eigen::VectorXd r = basis.values() * g;
  const auto gamma = basis.solve(r);
  EXPECT_LT((basis.values() * gamma - r).norm(), 1e-10 * r.norm());
  EXPECT_LT(basis.certificate(gamma, r), 1e-10);
}

TEST(FrozenBasis, SingleColumnNormalEquation) {
  const auto m = init_grid({1, 1}, kHeatBox);
  const FrozenBasis basis(m, SineDistance{kHeatBox}, cell_centred_grid(kHeatBox, {5, 4}));
  const Eigen::VectorXd J = basis.values().col(0);
  Eigen::VectorXd r(20);
  for (int k = 0; k < 20; ++k) r(k) = std::cos(0.7 * k);
  const auto gamma = basis.solve(r);
  EXPECT_NEAR(gamma(0), J.dot(r) / J.squaredNorm(), 1e-12 * std::abs(gamma(0)) + 1e-300);
}

TEST(FrozenBasis, TooFewPointsRejected) {
  const auto m = init_grid({3, 3}, kHeatBox);
  EXPECT_THROW(FrozenBasis(m, SineDistance{kHeatBox}, cell_centred_grid(kHeatBox, {2, 2})), ValidationError);
}

TEST(FrozenBasis, DuplicateBumpsNamed) {
  auto m = init_grid({2, 1}, kHeatBox);
  auto b0 = m.block(0), b1 = m.block(1);
  std::copy(b0.begin(), b0.end(), b1.begin());
  try {
    FrozenBasis(m, SineDistance{kHeatBox}, cell_centred_grid(kHeatBox, {6, 6}));
    FAIL() << "expected a rank error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("bumps 0 and 1"), std::string::npos) << e.what();
  }
}

TEST(Heat, InitialFitIsAccurate) {
  const auto res = solve_heat2d(small_config());
  EXPECT_LT(res.ic_mse, 1e-3);
}

TEST(Heat, ProjectedRhsDecaysAtAnalyticRate) {
  // For u = sin x sin y, nu Laplacian(u) = -2 nu u, so J dh/dt ~ -2 nu J h.
  auto cfg = small_config();
  cfg.fit.epochs = 1500;
  cfg.end_time = cfg.dt;
  const auto res = solve_heat2d(cfg);
  const SineDistance dist{kHeatBox};
  const FrozenBasis basis(res.model, dist, cell_centred_grid(kHeatBox, {24, 24}));
  const HeatEvolution evo(basis, 1.0);
  Eigen::VectorXd h(static_cast<Eigen::Index>(res.initial_heights.size()));
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = res.initial_heights[static_cast<std::size_t>(i)];
  const Eigen::VectorXd rate = basis.values() * evo.rhs(h);
  const Eigen::VectorXd expected = -2.0 * (basis.values() * h);
  EXPECT_LT((rate - expected).norm() / expected.norm(), 1e-2);
}

TEST(Heat, BoundaryExactAndShapesFrozen) {
  auto cfg = small_config();
  const auto res = solve_heat2d(cfg);
  EXPECT_EQ(res.evolving_parameters, 36u);
  ASSERT_GE(res.errors.size(), 2u);
  for (const auto& e : res.errors) EXPECT_LE(e.boundary, 1e-12) << "t = " << e.time;
  EXPECT_LE(res.worst_certificate, cfg.tolerance);

  cfg.end_time = cfg.dt;
  const auto one = solve_heat2d(cfg);
  EXPECT_EQ(shape_params(one.model), shape_params(res.model));
  EXPECT_EQ(one.initial_heights, res.initial_heights);
  EXPECT_NE(get_heights(one.model), get_heights(res.model));
}

TEST(Heat, ZeroDiffusionFreezesTheField) {
  auto cfg = small_config();
  cfg.nu = 0.0;
  cfg.end_time = 0.02;
  const auto res = solve_heat2d(cfg);
  const auto h = get_heights(res.model);
  double drift = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) drift = std::max(drift, std::abs(h[i] - res.initial_heights[i]));
  EXPECT_LT(drift / cfg.end_time, 1e-8);
}

TEST(Heat, MaximumDoesNotGrow) {
  const auto res = solve_heat2d(small_config());
  for (std::size_t k = 1; k < res.errors.size(); ++k)
    EXPECT_LE(res.errors[k].max_abs, res.errors[k - 1].max_abs * (1.0 + 1e-6)) << "t = " << res.errors[k].time;
}

TEST(Heat, ErrorSmallOverShortHorizon) {
  const auto res = solve_heat2d(small_config());
  EXPECT_LT(res.errors.back().rel_l2, 5e-2);
}

TEST(Heat, PruningKeepsInitialFit) {
  auto cfg = small_config();
  cfg.end_time = cfg.dt;
  cfg.prune_before_evolution.mode = PruneConfig::Mode::Fraction;
  cfg.prune_before_evolution.value = 0.15;
  cfg.prune_before_evolution.rounds = 1;
  cfg.prune_before_evolution.interval = 1;
  const auto res = solve_heat2d(cfg);
  EXPECT_LE(res.model.bump_count(), 36u);
  EXPECT_EQ(res.evolving_parameters, res.model.bump_count());
  EXPECT_LE(res.ic_mse, 2.0 * res.ic_mse_before_prune);
}

TEST(Heat, GuardedPruneRemovesSmallestFirst) {
  const auto box = kHeatBox;
  auto m = init_grid({4, 1}, box);
  const double h[4] = {0.5, -0.01, 2.0, 0.02};
  for (std::size_t i = 0; i < 4; ++i) m.block(i)[m.layout().height_offset()] = h[i];
  RegressionData d = heat2d_ic_data(box, SineDistance{box}, 12);
  PruneConfig cfg{PruneConfig::Mode::Fraction, 0.5, 1, 1};
  auto loose = m;
  prune_initial_fit(loose, d, cfg, std::numeric_limits<double>::infinity());
  ASSERT_EQ(loose.bump_count(), 2u);
  EXPECT_EQ(loose.geometry(0).center, m.geometry(0).center);
  EXPECT_EQ(loose.geometry(1).center, m.geometry(2).center);
  auto tight = m;
  const double before = regression_mse(tight, d);
  set_heights(tight, solve_heights(tight, d));
  const double after = prune_initial_fit(tight, d, cfg, 0.0);
  EXPECT_EQ(tight.bump_count(), 4u);
  EXPECT_LE(after, before);
}

TEST(Heat, Deterministic) {
  auto cfg = small_config();
  cfg.end_time = 0.01;
  const auto a = solve_heat2d(cfg);
  cfg.threads = 3;
  const auto b = solve_heat2d(cfg);
  EXPECT_EQ(a.model, b.model);
  ASSERT_EQ(a.errors.size(), b.errors.size());
  for (std::size_t k = 0; k < a.errors.size(); ++k) EXPECT_EQ(a.errors[k].rel_l2, b.errors[k].rel_l2);
}
