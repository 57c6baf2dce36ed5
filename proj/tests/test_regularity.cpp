#include <gtest/gtest.h>

#include "support.hpp"

namespace {

using namespace si_test;

const si::ModulusSpec kLinear = si::ModulusSpec::linear(1.0);

ScalarField on_interval(double lo, double hi, int samples, double (*fn)(double)) {
  return si::sample(si::Domain::box({lo}, {hi}), {samples}, [fn](const Point& y) { return fn(y[0]); });
}

TEST(Modulus, ParseAndEvaluate) {
  const auto lin = si::ModulusSpec::parse("linear:2.5");
  EXPECT_DOUBLE_EQ(lin(2.0), 5.0);
  const auto hol = si::ModulusSpec::parse("holder:0.5");
  EXPECT_DOUBLE_EQ(hol(4.0), 2.0);
  EXPECT_EQ(hol.to_string(), "holder:0.5");
  EXPECT_THROW(si::ModulusSpec::parse("holder:1.5"), si::InputError);
  EXPECT_THROW(si::ModulusSpec::parse("holder:0"), si::InputError);
  EXPECT_THROW(si::ModulusSpec::parse("linear:-1"), si::InputError);
  EXPECT_THROW(si::ModulusSpec::parse("linear:abc"), si::InputError);
  EXPECT_THROW(si::ModulusSpec::parse("cubic:1"), si::InputError);
}

// Property: sampled moduli are zero at 0, monotone, concave and satisfy the scaling bound.
TEST(ModulusProperty, SampledInvariants) {
  for (double k : {0.0, 0.5, 1.0, 7.0}) EXPECT_TRUE(si::check_modulus(si::ModulusSpec::linear(k)).ok()) << k;
  for (double a : {0.1, 0.5, 0.9, 1.0}) EXPECT_TRUE(si::check_modulus(si::ModulusSpec::holder(a)).ok()) << a;
}

TEST(Semiconcavity, Examples) {
  const auto concave = on_interval(-1.0, 1.0, 21, [](double y) { return -y * y; });
  EXPECT_EQ(si::estimate_semiconcavity(concave, kLinear).constant, 0.0);
  const auto convex = on_interval(-1.0, 1.0, 21, [](double y) { return y * y; });
  EXPECT_NEAR(si::estimate_semiconcavity(convex, kLinear).constant, 1.0, 1e-12);
  const auto tent = si::sample(unit_box(2), {11, 11}, [](const Point& y) { return 1.0 - std::abs(y[0] - y[1]); });
  EXPECT_NEAR(si::estimate_semiconcavity(tent, kLinear).constant, 0.0, 1e-12);
}

TEST(Semiconvexity, Examples) {
  const auto convex = on_interval(-1.0, 1.0, 21, [](double y) { return y * y; });
  EXPECT_EQ(si::estimate_semiconvexity(convex, kLinear).constant, 0.0);
  const auto vee = si::sample(si::Domain::ball({0.0}, 1.0), {21}, [](const Point& y) { return std::abs(y[0]) - 1.0; });
  EXPECT_NEAR(si::estimate_semiconvexity(vee, kLinear).constant, 0.0, 1e-12);
  const auto concave = on_interval(-1.0, 1.0, 21, [](double y) { return -y * y; });
  EXPECT_NEAR(si::estimate_semiconvexity(concave, kLinear).constant, 1.0, 1e-12);
}

TEST(Semiconcavity, ReportsWorstPair) {
  // A single upward kink at the centre: the one-step offset there maximises the quotient.
  const auto f = on_interval(-1.0, 1.0, 21, [](double y) { return std::abs(y); });
  const auto e = si::estimate_semiconcavity(f, kLinear);
  EXPECT_EQ(e.worst_point[0], 10);
  EXPECT_EQ(e.worst_offset[0], 1);
  EXPECT_NEAR(e.constant, 2.0 * 0.1 / (2.0 * 0.1 * 0.1), 1e-9);
  EXPECT_GT(e.sample_count, 0u);
}

TEST(Semiconcavity, NoSymmetricPairIsAnEstimationError) {
  EXPECT_THROW(si::estimate_semiconcavity(zero_grid(unit_box(1), {2}), kLinear), si::EstimationError);
}

TEST(C1Omega, Examples) {
  const auto affine = on_interval(-1.0, 1.0, 41, [](double y) { return 3.0 * y - 1.0; });
  EXPECT_NEAR(si::estimate_c1omega(affine, kLinear, 0.2).constant, 0.0, 1e-9);
  const auto half = on_interval(-1.0, 1.0, 41, [](double y) { return 0.5 * y * y; });
  EXPECT_NEAR(si::estimate_c1omega(half, kLinear, 0.2).constant, 1.0, 1e-9);
}

TEST(C1Omega, KinkDivergesLikeInverseSpacing) {
  double prev = 0.0;
  for (int samples : {21, 41, 81}) {
    const auto f = on_interval(-1.0, 1.0, samples, [](double y) { return std::abs(y); });
    const double s = f.spacing()[0];
    const double k = si::estimate_c1omega(f, kLinear, 2.0 * s).constant;
    EXPECT_NEAR(k * s, 1.0, 1e-9);
    if (prev > 0.0) {
      EXPECT_NEAR(k / prev, 2.0, 1e-9);
    }
    prev = k;
  }
}

TEST(C1Omega, EmptyCoreIsAnEstimationError) {
  EXPECT_THROW(si::estimate_c1omega(zero_grid(unit_box(1), {2}), kLinear, 1.0), si::EstimationError);
  const auto f = on_interval(-1.0, 1.0, 11, [](double y) { return y; });
  EXPECT_THROW(si::estimate_c1omega(f, kLinear, 0.5, si::Mask(f.size(), 0)), si::EstimationError);
}

TEST(TestedOffsets, AxisAndDiagonalMultiples) {
  EXPECT_EQ(si::tested_offsets(zero_grid(unit_box(1), {9})).size(), 3u);
  EXPECT_EQ(si::tested_offsets(zero_grid(unit_box(2), {9, 9})).size(), 12u);
  EXPECT_EQ(si::tested_offsets(zero_grid(unit_box(3), {9, 9, 9})).size(), 39u);
  EXPECT_EQ(si::tested_offsets(zero_grid(unit_box(2), {5, 5}), {.radius = 3, .all_offsets = true}).size(), 12u);
}

// Properties: negation duality, affine invariance and positive homogeneity.
TEST(RegularityProperty, DualityAffineAndScaling) {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 3;
    const auto d = si::Domain::box(std::vector<double>(n, -1.0), std::vector<double>(n, 1.0));
    const std::vector<int> shape(n, n == 3 ? 7 : 13);
    const auto f = random_field(rng, d, shape, trial % 2 ? FieldKind::smooth : FieldKind::mixed);
    const auto w = trial % 4 == 3 ? si::ModulusSpec::holder(0.5) : kLinear;
    const double c = si::estimate_semiconcavity(f, w).constant;
    EXPECT_EQ(c, si::estimate_semiconvexity(si::negated(f), w).constant);

    Point a{};
    for (int i = 0; i < n; ++i) a[i] = uniform(rng, -3.0, 3.0);
    const double b = uniform(rng, -3.0, 3.0);
    const auto shifted = si::map_valid(f, [&](double v, const Point& y) {
      double s = v + b;
      for (int i = 0; i < n; ++i) s += a[i] * y[i];
      return s;
    });
    EXPECT_NEAR(si::estimate_semiconcavity(shifted, w).constant, c, 1e-9 * std::max(1.0, c));

    const double lambda = uniform(rng, 0.1, 10.0);
    EXPECT_NEAR(si::estimate_semiconcavity(si::scaled(f, lambda), w).constant, lambda * c,
                1e-9 * std::max(1.0, lambda * c));
  }
}

// Property: for a field both semi-convex and semi-concave, the C1,1 estimate stays within a
// fixed multiple of max(C1, C2) as the grid is refined.
TEST(RegularityProperty, C11BoundedBySemiconstantsUnderRefinement) {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 2;
    const SmoothFn fn = random_smooth(rng, n);
    const auto d = si::Domain::box(std::vector<double>(n, -1.0), std::vector<double>(n, 1.0));
    for (int samples : {21, 41, 81}) {
      const auto f = si::sample(d, std::vector<int>(n, samples), fn);
      const double c1 = si::estimate_semiconcavity(f, kLinear).constant;
      const double c2 = si::estimate_semiconvexity(f, kLinear).constant;
      const double k = si::estimate_c1omega(f, kLinear, 2.0 * f.max_spacing()).constant;
      EXPECT_LE(k, 4.0 * std::max(c1, c2) + f.max_spacing() * 10.0) << "trial " << trial << " samples " << samples;
    }
  }
}

TEST(RegularityJson, Shape) {
  const auto f = on_interval(-1.0, 1.0, 11, [](double y) { return y * y; });
  const auto j = si::estimate_to_json(si::estimate_semiconcavity(f, kLinear), kLinear, 1);
  EXPECT_TRUE(j.contains("constant"));
  EXPECT_TRUE(j.contains("worst_point"));
  EXPECT_TRUE(j.contains("worst_offset"));
  EXPECT_EQ(j["modulus"]["kind"], "linear");
}

}  // namespace
