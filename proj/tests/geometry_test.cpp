#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "bumpnet/geometry.hpp"
#include "bumpnet/model.hpp"

namespace bumpnet {
namespace {

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

// Direct transcription of the two-dimensional bump with the (1 + tanh)/2 squash,
// with biases written out componentwise for rotation a, center c and sides l.
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

TEST(GramSchmidt, ZeroRotationIsIdentity) {
  const auto b = gram_schmidt_frame(std::vector<double>{0.0});
  EXPECT_DOUBLE_EQ(b[0], 1.0);
  EXPECT_DOUBLE_EQ(b[1], 0.0);
  EXPECT_DOUBLE_EQ(b[2], 0.0);
  EXPECT_DOUBLE_EQ(b[3], 1.0);
}

TEST(GramSchmidt, TwoDimensionalClosedForm) {
  for (double a : {-3.0, -0.4, 0.7, 2.5}) {
    const auto b = gram_schmidt_frame(std::vector<double>{a});
    EXPECT_DOUBLE_EQ(b[0], 1.0);
    EXPECT_DOUBLE_EQ(b[1], a);
    EXPECT_NEAR(b[2], -a, 1e-14 * (1 + a * a));
    EXPECT_NEAR(b[3], 1.0, 1e-14 * (1 + a * a));
  }
}

TEST(GramSchmidt, ThreeDimensionalClosedForm) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double a1 = u(rng), a2 = u(rng);
    const auto b = gram_schmidt_frame(std::vector<double>{a1, a2});
    const double expect[9] = {1.0, a1, a2, -a1, a2 * a2 + 1.0, -a1 * a2, -a2, 0.0, 1.0};
    const double scale = 1.0 + a1 * a1 + a2 * a2;
    for (int k = 0; k < 9; ++k) EXPECT_NEAR(b[k], expect[k], 1e-14 * scale * scale) << k;
  }
}

TEST(GramSchmidt, ColumnsOrthogonal) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (std::size_t n : {2u, 3u, 4u}) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> a(n - 1);
      for (auto& v : a) v = u(rng);
      const auto b = gram_schmidt_frame(a);
      EXPECT_DOUBLE_EQ(b[0], 1.0);
      for (std::size_t k = 1; k < n; ++k) EXPECT_DOUBLE_EQ(b[k], a[k - 1]);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = j + 1; i < n; ++i) {
          double dot = 0, nj = 0, ni = 0;
          for (std::size_t k = 0; k < n; ++k) {
            dot += b[j * n + k] * b[i * n + k];
            nj += b[j * n + k] * b[j * n + k];
            ni += b[i * n + k] * b[i * n + k];
          }
          EXPECT_LE(std::abs(dot), 1e-12 * std::sqrt(nj * ni));
        }
    }
  }
}

TEST(Biases, CenteredUnitBump) {
  BumpGeometry g{{0.0, 0.0}, {1.0, 1.0}, {0.0}, 1.0, 1.0};
  const auto f = geometry_to_biases(g);
  for (int j = 0; j < 2; ++j) {
    EXPECT_DOUBLE_EQ(f.s[j], 0.5);
    EXPECT_DOUBLE_EQ(f.sbar[j], 0.5);
  }
}

TEST(Biases, RotatedBump) {
  const double r2 = std::sqrt(2.0);
  BumpGeometry g{{0.0, 0.0}, {r2, r2}, {1.0}, 1.0, 1.0};
  const auto f = geometry_to_biases(g);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(f.s[j], 1.0, 1e-15);
    EXPECT_NEAR(f.sbar[j], 1.0, 1e-15);
  }
}

TEST(Biases, CenterMatchesTwoDimensionalClosedForm) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0), w(0.5, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = u(rng);
    HalfSpaceFrame f;
    f.dim = 2;
    f.directions = gram_schmidt_frame(std::vector<double>{a});
    f.s = {w(rng), w(rng)};
    f.sbar = {w(rng), w(rng)};
    const auto g = biases_to_geometry(f);
    const double d1 = f.sbar[0] - f.s[0], d2 = f.sbar[1] - f.s[1];
    EXPECT_NEAR(g.center[0], (d1 - a * d2) / (2 * (a * a + 1)), 1e-14);
    EXPECT_NEAR(g.center[1], (a * d1 + d2) / (2 * (a * a + 1)), 1e-14);
    EXPECT_NEAR(g.sides[0], (f.s[0] + f.sbar[0]) / std::sqrt(a * a + 1), 1e-14);
    EXPECT_NEAR(g.sides[1], (f.s[1] + f.sbar[1]) / std::sqrt(a * a + 1), 1e-14);
  }
}

TEST(Biases, SymmetricBiasesGiveZeroCenter) {
  HalfSpaceFrame f;
  f.dim = 3;
  f.directions = gram_schmidt_frame(std::vector<double>{0.3, -1.2});
  f.s = {0.4, 1.1, 0.2};
  f.sbar = f.s;
  const auto g = biases_to_geometry(f);
  for (double c : g.center) EXPECT_NEAR(c, 0.0, 1e-15);
}

TEST(Biases, DegenerateSupportRejected) {
  HalfSpaceFrame f;
  f.dim = 2;
  f.directions = gram_schmidt_frame(std::vector<double>{0.0});
  f.s = {0.5, -1.0};
  f.sbar = {0.5, 0.5};
  EXPECT_THROW(biases_to_geometry(f), ValidationError);
}

TEST(Biases, RoundTrip) {
  std::mt19937_64 rng(42);
  for (std::size_t n : {2u, 3u, 4u}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const auto g = random_geometry(rng, n);
      const auto back = biases_to_geometry(geometry_to_biases(g));
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_LE(std::abs(back.sides[j] - g.sides[j]), 1e-10 * std::abs(g.sides[j]));
        EXPECT_LE(std::abs(back.center[j] - g.center[j]), 1e-10 * std::max(1.0, std::abs(g.center[j])));
      }
    }
  }
}

TEST(RawParams, LayoutSizes) {
  const auto box = BoundingBox::cube(2, 0.0, 1.0);
  EXPECT_EQ(init_grid({6, 6}, box).parameter_count(), 252u);
  EXPECT_EQ(init_grid({20, 6}, box).parameter_count(), 840u);
  EXPECT_EQ(init_grid({2, 11}, box).parameter_count(), 154u);
  EXPECT_EQ(init_grid({10, 10}, box, false).parameter_count(), 600u);
  EXPECT_EQ(init_grid({2, 2, 2}, BoundingBox::cube(3, 0.0, 1.0)).parameter_count(), 8u * 10u);
}

TEST(RawParams, ZeroCountsRejected) {
  EXPECT_THROW(init_grid({0, 3}, BoundingBox::cube(2, 0.0, 1.0)), ValidationError);
}

TEST(RawParams, SingleCellGrid) {
  const auto model = init_grid({1, 1}, BoundingBox::cube(2, 0.0, 1.0));
  const auto g = model.geometry(0);
  EXPECT_NEAR(g.center[0], 0.5, 1e-15);
  EXPECT_NEAR(g.center[1], 0.5, 1e-15);
  EXPECT_NEAR(g.sides[0], 1.0, 1e-15);
  EXPECT_NEAR(g.sides[1], 1.0, 1e-15);
  EXPECT_NEAR(g.sharpness, 3.5, 1e-14);
  EXPECT_EQ(g.height, 1.0);
  EXPECT_EQ(g.rotation[0], 0.0);
}

TEST(RawParams, GridTilesBox) {
  const auto box = BoundingBox::cube(2, 0.0, 1.0);
  const auto model = init_grid({2, 2}, box);
  const double expect[4][2] = {{0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto g = model.geometry(i);
    EXPECT_NEAR(g.center[0], expect[i][0], 1e-15);
    EXPECT_NEAR(g.center[1], expect[i][1], 1e-15);
    EXPECT_NEAR(g.sides[0], 0.5, 1e-15);
    EXPECT_NEAR(g.sides[1], 0.5, 1e-15);
  }
}

TEST(RawParams, RawToGeometryExamples) {
  const auto box = BoundingBox::cube(2, -3.0, 3.0);
  BumpNetModel model(box, 1, true, {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0});
  const auto g = model.geometry(0);
  EXPECT_EQ(g.sides[0], 1.0);
  EXPECT_EQ(g.sides[1], 1.0);
  EXPECT_EQ(g.center[0], 0.0);
  EXPECT_EQ(g.center[1], 0.0);
  EXPECT_EQ(g.sharpness, 1.0);

  double prev = -1e300;
  for (double v = -10.0; v <= 10.0; v += 0.5) {
    BumpNetModel mv(box, 1, true, {0.0, 0.0, 0.0, v, v, 0.0, 1.0});
    const double c = mv.geometry(0).center[0];
    EXPECT_GT(c, prev);
    prev = c;
  }
  BumpNetModel hi(box, 1, true, {0.0, 0.0, 0.0, 10.0, -10.0, 0.0, 1.0});
  EXPECT_NEAR(hi.geometry(0).center[0], 3.0, 1e-7);
  EXPECT_NEAR(hi.geometry(0).center[1], -3.0, 1e-7);
}

TEST(RawParams, CentersAlwaysInsideBox) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> v(0.0, 2.0);
  const BoundingBox box({-1.0, 0.0, 2.0}, {1.0, 5.0, 2.5});
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> raw(10);
    for (auto& r : raw) r = v(rng);
    BumpNetModel m(box, 1, true, raw);
    EXPECT_TRUE(box.contains_strictly(m.geometry(0).center));
  }
}

TEST(RawParams, GeometryRoundTripThroughRaw) {
  std::mt19937_64 rng(9);
  const auto box = BoundingBox::cube(3, -3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = random_geometry(rng, 3);
    const auto m = model_from_geometry({g}, box);
    const auto back = m.geometry(0);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(back.center[j], g.center[j], 1e-12);
      EXPECT_NEAR(back.sides[j], g.sides[j], 1e-12 * g.sides[j]);
    }
    EXPECT_NEAR(back.sharpness, g.sharpness, 1e-12 * g.sharpness);
  }
}

TEST(EvalBump, ValueAtCenterAndFarAway) {
  const auto box = BoundingBox::cube(2, -5.0, 5.0);
  const auto m = model_from_geometry({{{0.3, -0.2}, {1.0, 1.0}, {0.0}, 10.0, 1.0}}, box);
  const std::vector<double> c{0.3, -0.2};
  EXPECT_GE(eval_bump(m, 0, c), 0.99);
  for (const auto& x : {std::vector<double>{3.0, 3.0}, std::vector<double>{-4.0, 0.0}, std::vector<double>{0.3, 4.0}})
    EXPECT_LE(eval_bump(m, 0, x), 0.01);
}

TEST(EvalBump, SharpnessProfile) {
  const auto box = BoundingBox::cube(2, -3.0, 3.0);
  const auto soft = model_from_geometry({{{0.0, 0.0}, {1.0, 1.0}, {0.0}, 0.1, 1.0}}, box);
  const auto sharp = model_from_geometry({{{0.0, 0.0}, {1.0, 1.0}, {0.0}, 50.0, 1.0}}, box);
  double soft_min = 1.0, soft_max = 0.0;
  for (double x = -3.0; x <= 3.0; x += 0.05) {
    const std::vector<double> pt{x, 0.0};
    const double s = eval_bump(soft, 0, pt);
    soft_min = std::min(soft_min, s);
    soft_max = std::max(soft_max, s);
    const double h = eval_bump(sharp, 0, pt);
    if (std::abs(x) < 0.4) EXPECT_GT(h, 0.999);
    if (std::abs(x) > 0.6) EXPECT_LT(h, 1e-3);
  }
  // A low, smooth bump at small sharpness.
  EXPECT_LT(soft_max - soft_min, 0.1);
}

TEST(EvalBump, GenericMatchesTwoDimensionalClosedForm) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0), l(0.3, 2.0), p(0.5, 6.0);
  const auto box = BoundingBox::cube(2, -3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    BumpGeometry g{{u(rng), u(rng)}, {l(rng), l(rng)}, {u(rng)}, p(rng), 1.0};
    const auto m = model_from_geometry({g}, box);
    const auto back = m.geometry(0);
    const std::vector<double> x{u(rng), u(rng)};
    const double expect = closed_form_2d(x[0], x[1], back.rotation[0], back.center[0], back.center[1], back.sides[0],
                                         back.sides[1], back.sharpness);
    EXPECT_NEAR(eval_bump(m, 0, x), expect, 1e-12);
  }
}

TEST(EvalBump, RangeAndSymmetry) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const auto box = BoundingBox::cube(2, -3.0, 3.0);
  const auto centered = model_from_geometry({{{0.0, 0.0}, {1.3, 0.7}, {0.0}, 2.5, 1.0}}, box);
  const auto m = model_from_geometry({{{0.5, -1.0}, {0.7, 1.9}, {0.8}, 4.0, 1.0}}, box);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> x{u(rng), u(rng)};
    const std::vector<double> mx{-x[0], -x[1]};
    const double v = eval_bump(m, 0, x);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(eval_bump(centered, 0, x), eval_bump(centered, 0, mx), 1e-15);
  }
}

TEST(EvalModel, Superposition) {
  const auto box = BoundingBox::cube(2, -3.0, 3.0);
  auto zero = init_grid({3, 3}, box);
  for (std::size_t i = 0; i < zero.bump_count(); ++i) zero.block(i)[zero.layout().height_offset()] = 0.0;
  const std::vector<double> x{0.4, -1.1};
  EXPECT_EQ(eval_model(zero, x), 0.0);

  const auto one = model_from_geometry({{{0.1, 0.2}, {1.0, 2.0}, {0.3}, 3.0, 2.0}}, box);
  EXPECT_DOUBLE_EQ(eval_model(one, x), 2.0 * eval_bump(one, 0, x));

  const auto two = model_from_geometry(
      {{{-1.5, 0.0}, {1.0, 1.0}, {0.0}, 20.0, 1.0}, {{1.5, 0.0}, {1.0, 1.0}, {0.0}, 20.0, -1.0}}, box);
  EXPECT_NEAR(eval_model(two, std::vector<double>{-1.5, 0.0}), 1.0, 1e-6);
  EXPECT_NEAR(eval_model(two, std::vector<double>{1.5, 0.0}), -1.0, 1e-6);
  const auto basis = eval_basis(two, std::vector<double>{-1.5, 0.0});
  EXPECT_NEAR(basis[0], 1.0, 1e-6);
  EXPECT_NEAR(basis[1], 0.0, 1e-6);
}

TEST(EvalModel, DimensionMismatch) {
  const auto m = init_grid({2, 2}, BoundingBox::cube(2, 0.0, 1.0));
  EXPECT_THROW(eval_model(m, std::vector<double>{0.5}), ValidationError);
  EXPECT_THROW(eval_basis(m, std::vector<double>{0.5, 0.5, 0.5}), ValidationError);
}

TEST(EvalModel, BasisDotHeights) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nrm(0.0, 0.3);
  auto m = init_grid({3, 2}, BoundingBox::cube(2, 0.0, 1.0));
  for (auto& r : m.raw()) r += nrm(rng);
  const std::vector<double> x{0.3, 0.6};
  const auto b = eval_basis(m, x);
  double dot = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) dot += m.height(i) * b[i];
  EXPECT_DOUBLE_EQ(eval_model(m, x), dot);
}

}  // namespace
}  // namespace bumpnet
