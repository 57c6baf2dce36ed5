#include <gtest/gtest.h>

#include "support.hpp"

namespace {

using namespace si_test;

TEST(LevelCrossings, LinearExample) {
  const auto h = si::sample(si::Domain::box({-1.0}, {1.0}), {21}, [](const Point& y) { return y[0]; });
  const auto c = si::level_crossings(h, 0.05);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].point[0], 0.05, 1e-12);
  EXPECT_EQ(c[0].cell[0], 10);
  // A level exactly on a sample is counted once.
  EXPECT_EQ(si::level_crossings(h, 0.0).size(), 1u);
  EXPECT_TRUE(si::level_crossings(h, 5.0).empty());
}

TEST(MarchingSquares, CircleAndSaddle) {
  const auto h = si::sample(si::Domain::box({-1.0, -1.0}, {1.0, 1.0}), {41, 41},
                            [](const Point& y) { return y[0] * y[0] + y[1] * y[1]; });
  const auto segs = si::marching_squares(h, 0.25);
  EXPECT_GT(segs.size(), 20u);
  for (const auto& s : segs)
    for (const auto& p : s) EXPECT_NEAR(std::hypot(p[0], p[1]), 0.5, 0.01);

  // Saddle: corners (0,0), (1,1) positive, the other two negative; centre average decides.
  const auto saddle = si::sample(unit_box(2), {2, 2}, [](const Point& y) { return (y[0] - 0.5) * (y[1] - 0.5) + 0.1; });
  const auto two = si::marching_squares(saddle, 0.0);
  EXPECT_EQ(two.size(), 2u);
  EXPECT_THROW(si::marching_squares(zero_grid(unit_box(1), {3}), 0.0), si::InputError);
}

TEST(GradientHistogram, Bins) {
  const auto hist = si::gradient_histogram({0.0, 0.05, 0.15, 1.99, 2.0, 7.0});
  ASSERT_EQ(hist.size(), 21u);
  EXPECT_EQ(hist[0], 2u);
  EXPECT_EQ(hist[1], 1u);
  EXPECT_EQ(hist[19], 1u);
  EXPECT_EQ(hist[20], 2u);
}

TEST(SelectRegularLevel, Examples) {
  const auto lin = si::sample(si::Domain::box({0.0}, {1.0}), {101}, [](const Point& y) { return y[0]; });
  const auto sel = si::select_regular_level(lin, 0.5, 0.02);
  EXPECT_DOUBLE_EQ(sel.level, 0.5);
  EXPECT_NEAR(sel.min_gradient, 1.0, 1e-9);
  EXPECT_GT(sel.band_samples, 0u);
  EXPECT_EQ(sel.tried.size(), 1u);

  // Gradient 0.01 everywhere: no level in the band is regular.
  const auto shallow = si::sample(si::Domain::box({0.0}, {1.0}), {101}, [](const Point& y) { return 0.01 * y[0]; });
  EXPECT_THROW(si::select_regular_level(shallow, 0.005, 0.002), si::LevelError);

  EXPECT_THROW(si::select_regular_level(lin, 2.0, 0.02), si::RangeError);
  EXPECT_THROW(si::select_regular_level(lin, 0.5, 0.0), si::InputError);
  const auto flat = zero_grid(unit_box(1), {11});
  try {
    si::select_regular_level(flat, 0.0, 0.1);
    FAIL() << "expected LevelError";
  } catch (const si::LevelError& e) {
    EXPECT_NE(std::string(e.what()).find("histogram"), std::string::npos);
  }
}

TEST(SelectRegularLevel, ShiftsAwayFromACriticalBand) {
  // |y - 0.5| has a critical point at the requested level 0 but is regular at 0.01.
  const auto vee = si::sample(si::Domain::box({0.0}, {1.0}), {101}, [](const Point& y) { return std::abs(y[0] - 0.5); });
  const auto sel = si::select_regular_level(vee, 0.02, 0.04);
  EXPECT_GT(sel.tried.size(), 1u);
  EXPECT_GE(sel.min_gradient, 0.1);
  EXPECT_NE(sel.level, 0.02);
}

si::ClosedMask points(const ScalarField& grid, const std::vector<double>& ys) {
  return si::ClosedMask::from_predicate(grid, [&](const Point& p) {
    for (double y : ys)
      if (std::abs(p[0] - y) < 1e-9) return true;
    return false;
  });
}

TEST(Separate, PointInOneDimension) {
  const auto grid = zero_grid(si::Domain::box({-1.0}, {3.0}), {201});
  const auto r = si::separate(points(grid, {0.0}), 2.0, 1.0);
  const double s = grid.max_spacing();
  EXPECT_NEAR(r.gap_to_A, 1.0, 1.5 * s);
  EXPECT_NEAR(r.gap_to_complement, 1.0, 1.5 * s);
  EXPECT_EQ(r.tube_violations, 0u);
  EXPECT_EQ(r.complement_violations, 0u);
  EXPECT_EQ(r.midline_violations, 0u);
  EXPECT_TRUE(r.a_in_interior);
  EXPECT_GE(r.level.min_gradient, 0.1);
  bool right = false;
  for (const auto& c : r.boundary) right = right || std::abs(c.point[0] - 1.0) <= 1.5 * s;
  EXPECT_TRUE(right);
  EXPECT_FALSE(r.gap_to_B.has_value());
}

TEST(Separate, DiskBoundaryIsACircle) {
  const auto grid = zero_grid(si::Domain::box({-2.0, -2.0}, {2.0, 2.0}), {81, 81});
  const auto A = si::ClosedMask::from_predicate(grid, [](const Point& y) { return std::hypot(y[0], y[1]) <= 0.3; });
  const auto r = si::separate(A, 1.0, 0.5);
  const double tol = 1.5 * grid.max_spacing();
  ASSERT_FALSE(r.boundary.empty());
  for (const auto& c : r.boundary) EXPECT_NEAR(std::hypot(c.point[0], c.point[1]), 0.3 + r.rho, tol);
  EXPECT_FALSE(r.segments.empty());
  EXPECT_EQ(r.tube_violations, 0u);
  EXPECT_EQ(r.complement_violations, 0u);
  EXPECT_EQ(r.midline_violations, 0u);
  EXPECT_GT(r.equidistant_samples, 0u);
}

TEST(Separate, Preconditions) {
  const auto grid = zero_grid(si::Domain::box({-1.0}, {3.0}), {201});
  const auto A = points(grid, {0.0});
  EXPECT_THROW(si::separate(A, 1.0, 1.0), si::PreconditionError);
  EXPECT_THROW(si::separate(A, 1.0, 0.0), si::PreconditionError);
  EXPECT_THROW(si::separate(A, 0.05, 0.03), si::ResolutionError);
  EXPECT_THROW(si::separate(A, 10.0, 5.0), si::PreconditionError);
}

TEST(MidlineSeparate, TwoPoints) {
  const auto grid = zero_grid(si::Domain::box({-1.0}, {3.0}), {201});
  const auto r = si::midline_separate(points(grid, {0.0}), points(grid, {2.0}));
  const double s = grid.max_spacing();
  ASSERT_TRUE(r.gap_to_B.has_value());
  EXPECT_NEAR(*r.gap_to_B, 1.0, 1.5 * s);
  EXPECT_NEAR(r.gap_to_A, 1.0, 1.5 * s);
  EXPECT_TRUE(*r.disjoint_from_B);
  EXPECT_EQ(r.midline_violations, 0u);
  EXPECT_GT(r.equidistant_samples, 0u);
}

TEST(MidlineSeparate, TwoDisksGiveTheBisector) {
  const auto grid = zero_grid(si::Domain::box({-1.5, -1.0}, {1.5, 1.0}), {61, 41});
  const auto A = si::ClosedMask::from_predicate(grid, [](const Point& y) { return std::hypot(y[0] + 0.7, y[1]) <= 0.2; });
  const auto B = si::ClosedMask::from_predicate(grid, [](const Point& y) { return std::hypot(y[0] - 0.7, y[1]) <= 0.2; });
  const auto r = si::midline_separate(A, B);
  EXPECT_EQ(r.midline_violations, 0u);
  EXPECT_LE(r.midline_max_distance, 1.5 * grid.max_spacing());
  EXPECT_TRUE(*r.disjoint_from_B);
  EXPECT_TRUE(r.a_in_interior);
}

TEST(MidlineSeparate, Errors) {
  const auto grid = zero_grid(si::Domain::box({-1.0}, {3.0}), {201});
  EXPECT_THROW(si::midline_separate(points(grid, {0.0}), points(grid, {0.0, 2.0})), si::PreconditionError);
  EXPECT_THROW(si::midline_separate(points(grid, {0.0}), points(grid, {0.1})), si::ResolutionError);
  const auto other = zero_grid(si::Domain::box({-1.0}, {3.0}), {101});
  EXPECT_THROW(si::midline_separate(points(grid, {0.0}), points(other, {2.0})), si::InputError);
}

// Property: random sets and radii give sigma containing the rho-tube, clear of the complement.
TEST(SeparationProperty, RandomSets) {
  Rng rng(314);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 2;
    const auto grid = zero_grid(si::Domain::box(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)),
                                std::vector<int>(n, n == 1 ? 161 : 41));
    const si::ClosedMask A(grid, random_blobs(rng, grid, 1 + trial % 2, 0.1));
    const double s = grid.max_spacing();
    const double a = uniform(rng, 8.0 * s, 0.3);
    const double rho = uniform(rng, 0.3, 0.7) * a;
    si::SeparationOptions opts;
    opts.metric = trial % 4 < 2 ? si::MetricKind::euclidean : si::MetricKind::grid_length;
    try {
      const auto r = si::separate(A, a, rho, opts);
      EXPECT_EQ(r.tube_violations, 0u) << trial;
      EXPECT_EQ(r.complement_violations, 0u) << trial;
      EXPECT_TRUE(r.a_in_interior) << trial;
      EXPECT_LE(r.sandwich_violation, 1e-8) << trial;
    } catch (const si::PreconditionError&) {
      // The tube covered the whole unit box.
    }
  }
}

TEST(SeparationJson, ShapeAndCsv) {
  const auto grid = zero_grid(si::Domain::box({-1.0}, {3.0}), {201});
  const auto r = si::separate(points(grid, {0.0}), 2.0, 1.0);
  const auto j = si::separation_to_json(r);
  EXPECT_TRUE(j["gap_to_B"].is_null());
  EXPECT_EQ(j["boundary_crossings"], r.boundary.size());
  EXPECT_TRUE(j["checks"].contains("midline_violations"));
  const auto csv = si::boundary_to_csv(r);
  EXPECT_EQ(csv.substr(0, 3), "y0\n");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r.boundary.size() + 1);
}

}  // namespace
