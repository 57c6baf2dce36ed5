#pragma once

// Separating domains between closed sample sets.
//
// For a set A and a > 0, with C = {d(., A) >= a} the complement of the open a-tube:
//   f = a - d(., C) <= g = d(., A),
// a strict insertion f <= h <= g gives Sigma = A u {h <= rho}, whose boundary sits at
// distance rho from A and a - rho from C.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "distance.hpp"
#include "insertion.hpp"

namespace smooth_insert {

/// A point where the level set crosses an axis edge of the grid, by linear interpolation.
struct LevelCrossing {
  Point point{};
  /// Lower endpoint of the crossed edge.
  GridIndex cell{};
  int axis = 0;
};

inline std::vector<LevelCrossing> level_crossings(const ScalarField& h, double level) {
  const int n = h.dim();
  std::vector<LevelCrossing> out;
  for_each_valid(h, [&](std::size_t k) {
    const GridIndex g = h.index(k);
    const double a = h[k] - level;
    for (int i = 0; i < n; ++i) {
      GridIndex t = g;
      ++t[i];
      if (!h.valid(t)) continue;
      const double b = h[h.flat(t)] - level;
      // Half-open on the upper endpoint so that a sample exactly on the level is counted once.
      const bool crosses = (a == 0.0) || (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0);
      if (!crosses) continue;
      const double s = a == 0.0 ? 0.0 : a / (a - b);
      LevelCrossing c;
      c.cell = g;
      c.axis = i;
      c.point = h.point(g);
      c.point[i] += s * h.spacing()[i];
      out.push_back(c);
    }
  });
  return out;
}

using Segment = std::array<Point, 2>;

/// Marching squares on a 2D field; ambiguous cells are resolved with the cell-centre average.
inline std::vector<Segment> marching_squares(const ScalarField& h, double level) {
  if (h.dim() != 2) throw InputError("marching squares needs a 2D field");
  std::vector<Segment> out;
  const GridIndex& shape = h.shape();
  for (int i = 0; i + 1 < shape[0]; ++i)
    for (int j = 0; j + 1 < shape[1]; ++j) {
      // Corners counter-clockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1).
      const std::array<GridIndex, 4> c = {{{i, j, 0}, {i + 1, j, 0}, {i + 1, j + 1, 0}, {i, j + 1, 0}}};
      std::array<double, 4> v{};
      bool ok = true;
      for (int q = 0; q < 4 && ok; ++q) {
        ok = h.valid(c[q]);
        if (ok) v[q] = h[h.flat(c[q])] - level;
      }
      if (!ok) continue;
      int code = 0;
      for (int q = 0; q < 4; ++q) code |= (v[q] > 0.0 ? 1 : 0) << q;
      if (code == 0 || code == 15) continue;
      auto edge_point = [&](int e) {
        const int p = e, q = (e + 1) % 4;
        const double t = v[p] / (v[p] - v[q]);
        const Point a = h.point(c[p]), b = h.point(c[q]);
        return Point{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), 0.0};
      };
      std::vector<int> edges;
      for (int e = 0; e < 4; ++e)
        if (((code >> e) & 1) != ((code >> ((e + 1) % 4)) & 1)) edges.push_back(e);
      if (edges.size() == 2) {
        out.push_back({edge_point(edges[0]), edge_point(edges[1])});
      } else {
        // Saddle: corners 0 and 2 share a sign, 1 and 3 the other.
        const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        const bool join02 = (centre > 0.0) == (v[0] > 0.0);
        if (join02) {
          out.push_back({edge_point(0), edge_point(1)});
          out.push_back({edge_point(2), edge_point(3)});
        } else {
          out.push_back({edge_point(3), edge_point(0)});
          out.push_back({edge_point(1), edge_point(2)});
        }
      }
    }
  return out;
}

struct LevelSelection {
  double level = 0.0;
  double requested = 0.0;
  /// Minimum gradient magnitude over the band of the selected level.
  double min_gradient = 0.0;
  std::size_t band_samples = 0;
  std::vector<double> tried;
};

/// Counts of finite-difference gradient magnitudes in `bins` equal bins over [0, hi), plus an overflow bin.
inline std::vector<std::size_t> gradient_histogram(const std::vector<double>& magnitudes, double hi = 2.0,
                                                   int bins = 20) {
  std::vector<std::size_t> out(bins + 1, 0);
  for (double m : magnitudes) {
    const int b = static_cast<int>(std::floor(m / hi * bins));
    ++out[std::clamp(b, 0, bins)];
  }
  return out;
}

/// Gradient magnitudes at valid samples with |h - level| < band_width.
inline std::vector<double> band_gradients(const ScalarField& h, double level, double band_width) {
  std::vector<double> out;
  for_each_valid(h, [&](std::size_t k) {
    if (!(std::abs(h[k] - level) < band_width)) return;
    try {
      out.push_back(norm(gradient_fd(h, h.index(k)).value, h.dim()));
    } catch (const EstimationError&) {
    }
  });
  return out;
}

/// Tries rho0, rho0 +- bw/4, +- bw/2, +- 3bw/4, +- bw in that order and returns the first
/// level whose band {|h - level| < bw} is nonempty with gradient magnitudes >= grad_floor.
inline LevelSelection select_regular_level(const ScalarField& h, double rho0, double band_width,
                                           double grad_floor = 0.1) {
  if (!(band_width > 0.0)) throw InputError("band width must be positive");
  const auto [lo, hi] = value_range(h);
  if (rho0 < lo || rho0 > hi)
    throw RangeError("level " + format_double(rho0) + " is outside the field range [" + format_double(lo) + ", " +
                     format_double(hi) + "]");
  LevelSelection out;
  out.requested = rho0;
  for (double step : {0.0, 0.25, -0.25, 0.5, -0.5, 0.75, -0.75, 1.0, -1.0}) {
    const double level = rho0 + step * band_width;
    out.tried.push_back(level);
    const auto mags = band_gradients(h, level, band_width);
    if (mags.empty()) continue;
    const double m = *std::min_element(mags.begin(), mags.end());
    if (m >= grad_floor) {
      out.level = level;
      out.min_gradient = m;
      out.band_samples = mags.size();
      return out;
    }
  }
  const auto hist = gradient_histogram(band_gradients(h, rho0, band_width));
  std::ostringstream os;
  os << "no level within " << band_width << " of " << rho0 << " has gradient >= " << grad_floor
     << " on its band; gradient histogram at the requested level (bins of 0.1 on [0,2), then overflow):";
  for (auto c : hist) os << ' ' << c;
  throw LevelError(os.str());
}

struct SeparationOptions {
  MetricKind metric = MetricKind::euclidean;
  InsertionOptions insertion{};
  /// Level search band, in cells.
  double band_cells = 1.0;
  double grad_floor = 0.1;
  /// The box or ball barrier is the grid domain enlarged by this many cells.
  int barrier_pad_cells = 3;
  /// Identity tolerance in cells, and the half-width in cells used to pick equidistant samples.
  double tolerance_cells = 1.5;
  double equidistant_cells = 0.5;
};

struct SeparationResult {
  Mask sigma{};
  std::vector<LevelCrossing> boundary{};
  /// Boundary polyline pieces (2D only).
  std::vector<Segment> segments{};
  double rho = 0.0;
  double rho_requested = 0.0;
  double a = 0.0;
  double gap_to_A = 0.0;
  double gap_to_complement = 0.0;
  /// Set by midline_separate.
  std::optional<double> gap_to_B{};
  ScalarField h_field;
  LevelSelection level{};
  double tolerance = 0.0;
  /// Samples of the closed rho-tube of A missing from Sigma (beyond tolerance).
  std::size_t tube_violations = 0;
  /// Samples of Sigma closer than a - rho to the complement (beyond tolerance).
  std::size_t complement_violations = 0;
  /// Equidistant samples farther than the tolerance from every boundary crossing.
  std::size_t equidistant_samples = 0;
  std::size_t midline_violations = 0;
  double midline_max_distance = 0.0;
  bool a_in_interior = true;
  std::optional<bool> disjoint_from_B{};
  double K = 0.0;
  double sandwich_violation = 0.0;
  std::optional<RegularityEstimate> c11_estimate{};
};

namespace detail {

/// Smallest Euclidean distance from any crossing point to the boundary samples of `set`.
inline double crossing_gap(const std::vector<LevelCrossing>& crossings, const ScalarField& grid, const Mask& set) {
  const Mask b = boundary_of(grid, set);
  const Mask& use = any_of(b) ? b : set;
  std::vector<Point> pts;
  for (std::size_t k = 0; k < use.size(); ++k)
    if (use[k]) pts.push_back(grid.point(k));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : crossings)
    for (const auto& p : pts) best = std::min(best, distance(c.point, p, grid.dim()));
  return best;
}

/// Counts samples with |dA - ta| <= eq and |dB - tb| <= eq and the largest distance from one
/// of them to the nearest crossing; `violations` counts those beyond `tol`.
inline void check_equidistant(const ScalarField& dA, double ta, const ScalarField& dB, double tb,
                              const std::vector<LevelCrossing>& crossings, double eq, double tol,
                              SeparationResult& out) {
  for_each_valid(dA, [&](std::size_t k) {
    if (std::abs(dA[k] - ta) > eq || std::abs(dB[k] - tb) > eq) return;
    ++out.equidistant_samples;
    const Point y = dA.point(k);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : crossings) best = std::min(best, distance(y, c.point, dA.dim()));
    out.midline_max_distance = std::max(out.midline_max_distance, best);
    if (best > tol) ++out.midline_violations;
  });
}

}  // namespace detail

inline SeparationResult separate(const ClosedMask& A, double a, double rho, const SeparationOptions& opts = {}) {
  const ScalarField& grid = A.grid();
  const int n = grid.dim();
  const double s = grid.max_spacing();
  if (!(rho > 0.0 && rho < a)) throw PreconditionError("need 0 < rho < a");
  if (a <= 3.0 * s || rho <= 3.0 * s)
    throw ResolutionError("a and rho must exceed 3 grid spacings (" + format_double(3.0 * s) + ")");

  const ScalarField dA = distance_to(grid, A.bits(), opts.metric);
  // Samples at distance exactly a belong to C; the slack absorbs rounding in the transform.
  const double at_a = a - 1e-9 * s;
  Mask C(grid.size(), 0);
  for_each_valid(dA, [&](std::size_t k) { C[k] = dA[k] >= at_a ? 1 : 0; });
  if (!any_of(C)) throw PreconditionError("the a-tube of A covers the whole grid");
  const ScalarField dC = distance_to(grid, C, opts.metric);

  const ScalarField f = map_valid(dC, [a](double v, const Point&) { return a - v; });
  const InsertionResult ins = insert_strict(f, dA, padded_domain(grid, opts.barrier_pad_cells), opts.insertion);

  SeparationResult out{.h_field = ins.h};
  out.a = a;
  out.rho_requested = rho;
  out.K = ins.K;
  out.sandwich_violation = ins.sandwich_violation;
  out.c11_estimate = ins.c11_estimate;
  out.tolerance = opts.tolerance_cells * s;
  out.level = select_regular_level(ins.h, rho, opts.band_cells * s, opts.grad_floor);
  out.rho = out.level.level;

  out.sigma.assign(grid.size(), 0);
  for_each_valid(ins.h, [&](std::size_t k) { out.sigma[k] = (A[k] || ins.h[k] <= out.rho) ? 1 : 0; });
  out.boundary = level_crossings(ins.h, out.rho);
  if (out.boundary.empty()) throw LevelError("the level set of h at " + format_double(out.rho) + " is empty");
  if (n == 2) out.segments = marching_squares(ins.h, out.rho);

  out.gap_to_A = detail::crossing_gap(out.boundary, grid, A.bits());
  out.gap_to_complement = detail::crossing_gap(out.boundary, grid, C);

  for_each_valid(grid, [&](std::size_t k) {
    if (dA[k] <= out.rho - out.tolerance && !out.sigma[k]) ++out.tube_violations;
    if (out.sigma[k] && dC[k] < a - out.rho - out.tolerance) ++out.complement_violations;
  });
  const Mask inner = interior_of(grid, out.sigma);
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (A[k] && !inner[k]) out.a_in_interior = false;
  detail::check_equidistant(dA, out.rho, dC, a - out.rho, out.boundary, opts.equidistant_cells * s, out.tolerance,
                            out);
  return out;
}

/// Separation at half the distance between two disjoint sets.
inline SeparationResult midline_separate(const ClosedMask& A, const ClosedMask& B, const SeparationOptions& opts = {}) {
  const ScalarField& grid = A.grid();
  if (!B.grid().same_grid(grid)) throw InputError("masks live on different grids");
  for (std::size_t k = 0; k < A.size(); ++k)
    if (A[k] && B[k]) throw PreconditionError("A and B overlap at sample " + format_index(grid.index(k), grid.dim()));
  const double s = grid.max_spacing();
  const ScalarField dA = distance_to(grid, A.bits(), opts.metric);
  const double dAB = min_over(dA, B.bits());
  if (dAB <= 6.0 * s)
    throw ResolutionError("d(A,B) = " + format_double(dAB) + " does not exceed 6 grid spacings (" +
                          format_double(6.0 * s) + ")");

  SeparationResult out = separate(A, dAB, 0.5 * dAB, opts);
  out.gap_to_B = detail::crossing_gap(out.boundary, grid, B.bits());
  bool disjoint = true;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (B[k] && out.sigma[k]) disjoint = false;
  out.disjoint_from_B = disjoint;

  // Midline containment is stated against B rather than the tube complement.
  out.equidistant_samples = 0;
  out.midline_violations = 0;
  out.midline_max_distance = 0.0;
  const ScalarField dB = distance_to(grid, B.bits(), opts.metric);
  detail::check_equidistant(dA, 0.5 * dAB, dB, 0.5 * dAB, out.boundary, opts.equidistant_cells * s, out.tolerance, out);
  return out;
}

inline json separation_to_json(const SeparationResult& r) {
  std::size_t sigma_count = 0;
  for (auto b : r.sigma) sigma_count += b;
  json j;
  j["a"] = r.a;
  j["rho"] = r.rho;
  j["rho_requested"] = r.rho_requested;
  j["gap_to_A"] = r.gap_to_A;
  j["gap_to_complement"] = r.gap_to_complement;
  j["gap_to_B"] = r.gap_to_B ? json(*r.gap_to_B) : json(nullptr);
  j["tolerance"] = r.tolerance;
  j["sigma_samples"] = sigma_count;
  j["boundary_crossings"] = r.boundary.size();
  j["level"] = {{"requested", r.level.requested},
                {"selected", r.level.level},
                {"min_gradient", r.level.min_gradient},
                {"band_samples", r.level.band_samples}};
  j["checks"] = {{"tube_violations", r.tube_violations},
                 {"complement_violations", r.complement_violations},
                 {"equidistant_samples", r.equidistant_samples},
                 {"midline_violations", r.midline_violations},
                 {"midline_max_distance", r.midline_max_distance},
                 {"a_in_interior", r.a_in_interior},
                 {"disjoint_from_B", r.disjoint_from_B ? json(*r.disjoint_from_B) : json(nullptr)}};
  j["insertion"] = {{"K", r.K},
                    {"sandwich_violation", r.sandwich_violation},
                    {"c11_estimate", r.c11_estimate ? json(r.c11_estimate->constant) : json(nullptr)}};
  return j;
}

/// Boundary as CSV: one segment per row in 2D, one crossing point per row otherwise.
inline std::string boundary_to_csv(const SeparationResult& r) {
  const int n = r.h_field.dim();
  std::string out;
  if (n == 2) {
    out = "x0,y0,x1,y1\n";
    for (const auto& s : r.segments)
      out += format_double(s[0][0]) + "," + format_double(s[0][1]) + "," + format_double(s[1][0]) + "," +
             format_double(s[1][1]) + "\n";
    return out;
  }
  for (int i = 0; i < n; ++i) out += (i ? ",y" : "y") + std::to_string(i);
  out += "\n";
  for (const auto& c : r.boundary) {
    for (int i = 0; i < n; ++i) out += (i ? "," : "") + format_double(c.point[i]);
    out += "\n";
  }
  return out;
}

}  // namespace smooth_insert
