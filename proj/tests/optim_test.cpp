#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "bumpnet/optim.hpp"

namespace bumpnet {
namespace {

TEST(Adam, ZeroGradientLeavesParametersAlone) {
  std::vector<double> theta{1.0, -2.0, 3.0};
  const auto before = theta;
  AdamState s(3);
  const std::vector<double> g(3, 0.0);
  for (int i = 0; i < 5; ++i) s.step(theta, g, 0.1);
  EXPECT_EQ(theta, before);
  for (double m : s.first_moment()) EXPECT_EQ(m, 0.0);
  for (double v : s.second_moment()) EXPECT_EQ(v, 0.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> theta{0.0, 0.0, 0.0, 0.0};
  AdamState s(4);
  const std::vector<double> g{3.0, -0.25, 1e-3, 0.0};
  s.step(theta, g, 0.01);
  EXPECT_NEAR(theta[0], -0.01, 1e-9);
  EXPECT_NEAR(theta[1], 0.01, 1e-9);
  EXPECT_NEAR(theta[2], -0.01, 1e-7);
  EXPECT_EQ(theta[3], 0.0);
}

TEST(Adam, ConvergesOnQuadratic) {
  const std::vector<double> target{0.6, -0.8};
  std::vector<double> theta{0.0, 0.0};  // distance 1 from target
  AdamState s(2);
  for (int it = 0; it < 200; ++it) {
    const std::vector<double> g{2 * (theta[0] - target[0]), 2 * (theta[1] - target[1])};
    s.step(theta, g, 0.1);
  }
  EXPECT_LT(std::hypot(theta[0] - target[0], theta[1] - target[1]), 1e-2);
}

TEST(Adam, RejectsNonFiniteGradient) {
  std::vector<double> theta{0.0};
  AdamState s(1);
  EXPECT_THROW(s.step(theta, std::vector<double>{NAN}, 0.1), NumericalError);
  EXPECT_THROW(s.step(theta, std::vector<double>{1.0, 2.0}, 0.1), ValidationError);
}

TEST(Adam, AscentMovesUphill) {
  std::vector<double> theta{0.0};
  AdamState s(1);
  s.ascend(theta, std::vector<double>{2.0}, 0.1);
  EXPECT_NEAR(theta[0], 0.1, 1e-9);
}

TEST(LrSchedule, StepDecay) {
  const LrSchedule s{0.07, 0.9, 1000};
  EXPECT_EQ(s.rate(999) / s.rate(0), 1.0);
  EXPECT_DOUBLE_EQ(s.rate(1000) / s.rate(0), 0.9);
  const LrSchedule half{0.5, 0.9, 1000};
  EXPECT_EQ(half.rate(1000) / half.rate(0), 0.9);
  EXPECT_DOUBLE_EQ(s.rate(2500), 0.07 * 0.81);
  EXPECT_GT(s.rate(1000000), 0.0);
}

BumpNetModel strip(std::vector<double> heights) {
  auto m = init_grid({heights.size(), 1}, BoundingBox::cube(2, 0.0, 1.0));
  for (std::size_t i = 0; i < heights.size(); ++i) m.block(i)[m.layout().height_offset()] = heights[i];
  return m;
}

TEST(Prune, FractionWithTiesUsesLowestIndices) {
  auto m = strip(std::vector<double>(10, 0.5));
  const PruneConfig cfg{PruneConfig::Mode::Fraction, 0.15, 100, 1};
  const auto sel = select_prunable(m, cfg);
  EXPECT_EQ(sel, (std::vector<std::size_t>{0, 1}));  // ceil(0.15 * 10) = 2
}

TEST(Prune, ThresholdRemovesSmallHeights) {
  auto m = strip({1.0, 1e-6});
  AdamState s(m.parameter_count());
  const auto res = prune(m, s, {PruneConfig::Mode::Threshold, 1e-3, 100, 1});
  EXPECT_EQ(res.removed, (std::vector<std::size_t>{1}));
  EXPECT_EQ(m.bump_count(), 1u);
  EXPECT_EQ(m.height(0), 1.0);
}

TEST(Prune, NeverEmptiesTheModel) {
  auto m = strip({1e-9, 1e-9, 1e-9});
  AdamState s(m.parameter_count());
  prune(m, s, {PruneConfig::Mode::Threshold, 1.0, 100, 1});
  EXPECT_EQ(m.bump_count(), 1u);
  EXPECT_THROW(prune(m, s, {PruneConfig::Mode::Threshold, 1.0, 100, 1}), ValidationError);
}

TEST(Prune, ShrinksParametersAndResetsOptimizer) {
  auto m = strip({0.3, -2.0, 0.01, 1.5, -0.02});
  const auto before = m;
  AdamState s(m.parameter_count());
  std::vector<double> g(m.parameter_count(), 1.0);
  s.step(m.raw(), g, 0.0);
  const auto res = prune(m, s, {PruneConfig::Mode::Fraction, 0.3, 100, 1});
  ASSERT_EQ(res.removed, (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(m.parameter_count(), before.parameter_count() - 7 * 2);
  EXPECT_EQ(s.size(), m.parameter_count());
  EXPECT_EQ(s.steps(), 0u);
  for (double v : s.first_moment()) EXPECT_EQ(v, 0.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const std::vector<double> x{u(rng), u(rng)};
    double expect = 0.0;
    for (std::size_t i : {0u, 1u, 3u}) expect += before.height(i) * eval_bump(before, i, x);
    EXPECT_EQ(eval_model(m, x), expect);
    const double removed = before.height(2) * eval_bump(before, 2, x) + before.height(4) * eval_bump(before, 4, x);
    EXPECT_NEAR(eval_model(before, x) - removed, eval_model(m, x), 1e-15);
  }
}

TEST(Prune, ModelBlocksSurviveUnchanged) {
  auto m = strip({0.3, -2.0, 0.01});
  const auto before = m;
  AdamState s(m.parameter_count());
  prune(m, s, {PruneConfig::Mode::Threshold, 0.1, 100, 1});
  ASSERT_EQ(m.bump_count(), 2u);
  for (std::size_t r = 0; r < 7; ++r) {
    EXPECT_EQ(m.block(0)[r], before.block(0)[r]);
    EXPECT_EQ(m.block(1)[r], before.block(1)[r]);
  }
}

RegressionData sample(const BoundingBox& box, std::size_t count, std::uint64_t seed, auto f) {
  RegressionData d;
  d.dim = box.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> x(d.dim);
    for (std::size_t j = 0; j < d.dim; ++j) x[j] = box.lower[j] + u(rng) * box.extent(j);
    d.points.insert(d.points.end(), x.begin(), x.end());
    d.values.push_back(f(x));
  }
  return d;
}

TEST(Regression, FitsZero) {
  const auto box = BoundingBox::cube(2, 0.0, 1.0);
  auto m = init_grid({3, 3}, box);
  const auto data = sample(box, 200, 2, [](const std::vector<double>&) { return 0.0; });
  TrainOptions opt;
  opt.epochs = 1500;
  opt.schedule.initial = 0.02;
  const auto trace = train_regression(m, data, opt);
  EXPECT_LT(regression_mse(m, data), 1e-6);
  EXPECT_LT(trace.window_mean(true), trace.window_mean(false));
}

TEST(Regression, RecoversSingleBumpCenter) {
  const auto box = BoundingBox::cube(2, -1.0, 1.0);
  const auto target = model_from_geometry({{{0.3, -0.2}, {0.8, 0.6}, {0.0}, 6.0, 1.0}}, box);
  const auto data = sample(box, 400, 3, [&](const std::vector<double>& x) { return eval_model(target, x); });
  auto m = model_from_geometry({{{0.0, 0.0}, {0.8, 0.8}, {0.0}, 4.0, 0.5}}, box);
  TrainOptions opt;
  opt.epochs = 3000;
  opt.schedule.initial = 0.02;
  train_regression(m, data, opt);
  const auto g = m.geometry(0);
  EXPECT_LT(std::hypot(g.center[0] - 0.3, g.center[1] + 0.2), 0.05);
  EXPECT_LT(regression_mse(m, data), 1e-4);
}

TEST(Regression, DivergenceAborts) {
  const auto box = BoundingBox::cube(1, 0.0, 1.0);
  auto m = init_grid({2}, box);
  RegressionData d{1, {0.5}, {NAN}, {}};
  TrainOptions opt;
  opt.epochs = 3;
  EXPECT_THROW(train_regression(m, d, opt), NumericalError);
}

TEST(Regression, DeterministicAcrossRunsAndThreads) {
  const auto box = BoundingBox::cube(2, 0.0, 1.0);
  const auto data = sample(box, 1500, 4, [](const std::vector<double>& x) { return x[0] * x[1]; });
  TrainOptions opt;
  opt.epochs = 40;
  opt.schedule.initial = 0.05;
  auto m1 = init_grid({3, 2}, box), m2 = m1, m3 = m1;
  const auto t1 = train_regression(m1, data, opt, 1);
  const auto t2 = train_regression(m2, data, opt, 1);
  const auto t3 = train_regression(m3, data, opt, 3);
  EXPECT_TRUE(m1 == m2);
  EXPECT_TRUE(m1 == m3);
  for (std::size_t i = 0; i < t1.rows.size(); ++i) {
    EXPECT_EQ(t1.rows[i].total, t2.rows[i].total);
    EXPECT_EQ(t1.rows[i].total, t3.rows[i].total);
  }
}

TEST(Regression, PruningDuringTrainingRecordsRounds) {
  const auto box = BoundingBox::cube(2, 0.0, 1.0);
  const auto data = sample(box, 300, 5, [](const std::vector<double>& x) { return std::sin(3 * x[0]); });
  auto m = init_grid({4, 4}, box);
  TrainOptions opt;
  opt.epochs = 100;
  opt.schedule.initial = 0.02;
  opt.prune = {PruneConfig::Mode::Fraction, 0.15, 20, 3};
  const auto trace = train_regression(m, data, opt);
  EXPECT_EQ(trace.prune_steps, (std::vector<std::size_t>{19, 39, 59}));
  // 16 -> 13 -> 11 -> 9
  EXPECT_EQ(m.bump_count(), 9u);
  EXPECT_EQ(trace.rows.front().bump_count, 16u);
  EXPECT_EQ(trace.rows[20].bump_count, 13u);
  EXPECT_EQ(trace.rows.back().bump_count, 9u);
}

}  // namespace
}  // namespace bumpnet
