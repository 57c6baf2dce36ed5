#pragma once

// Distance fields to sample sets, tubes, and grid-scale checks of the metric identities
// relating a set, its boundary and its tubes.
//
// Two backends: the exact Euclidean distance to the marked sample points (separable
// squared-distance transform), and shortest paths on the 8/26-connected grid graph.
// Boundaries are taken with axis connectivity: a sample of S is on the boundary when one
// of its valid axis neighbours is not in S. Grid-edge samples are not boundary by default,
// since the grid is the whole space.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "field.hpp"
#include "field_io.hpp"

namespace smooth_insert {

enum class MetricKind { euclidean, grid_length };

inline MetricKind parse_metric(const std::string& s) {
  if (s == "euclidean") return MetricKind::euclidean;
  if (s == "grid-length") return MetricKind::grid_length;
  throw InputError("unknown metric '" + s + "' (expected euclidean or grid-length)");
}

inline std::string metric_name(MetricKind m) { return m == MetricKind::euclidean ? "euclidean" : "grid-length"; }

/// Worst ratio of grid-graph length to Euclidean length on an isotropic grid.
inline double metrication_factor(MetricKind m, int dim) {
  if (m == MetricKind::euclidean || dim == 1) return 1.0;
  const double a = std::sqrt(2.0) - 1.0, b = std::sqrt(3.0) - std::sqrt(2.0);
  return dim == 2 ? std::sqrt(1.0 + a * a) : std::sqrt(1.0 + a * a + b * b);
}

/// A nonempty set of valid samples of a grid.
class ClosedMask {
 public:
  ClosedMask(const ScalarField& grid, Mask bits)
      : grid_(grid.with_values(std::vector<double>(grid.size(), 0.0))), bits_(std::move(bits)) {
    if (bits_.size() != grid_.size()) throw InputError("mask length does not match the grid");
    std::size_t count = 0;
    for (std::size_t k = 0; k < bits_.size(); ++k) {
      if (!bits_[k]) continue;
      if (!grid_.valid(k)) throw InputError("mask marks the invalid sample " + format_index(grid_.index(k), grid_.dim()));
      bits_[k] = 1;
      ++count;
    }
    if (count == 0) throw InputError("mask is empty");
  }

  static ClosedMask from_predicate(const ScalarField& grid, const std::function<bool(const Point&)>& in) {
    Mask m(grid.size(), 0);
    for_each_valid(grid, [&](std::size_t k) { m[k] = in(grid.point(k)) ? 1 : 0; });
    return ClosedMask(grid, std::move(m));
  }

  const ScalarField& grid() const { return grid_; }
  const Mask& bits() const { return bits_; }
  bool operator[](std::size_t k) const { return bits_[k] != 0; }
  std::size_t size() const { return bits_.size(); }
  int dim() const { return grid_.dim(); }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

 private:
  ScalarField grid_;
  Mask bits_;
};

namespace detail {

/// Lower envelope of parabolas (q s - x)^2 + f[q]; infinite f entries are skipped.
inline void squared_distance_1d(const std::vector<double>& f, std::vector<double>& out, double s) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  const double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    const double xq = q * s;
    double cut = -inf;
    while (k >= 0) {
      const double xv = v[k] * s;
      cut = ((f[q] + xq * xq) - (f[v[k]] + xv * xv)) / (2.0 * (xq - xv));
      if (cut <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
    } else {
      ++k;
      v[k] = q;
      z[k] = cut;
    }
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    const double xq = q * s;
    while (z[j + 1] < xq) ++j;
    const double d = xq - v[j] * s;
    out[q] = d * d + f[v[j]];
  }
}

inline std::vector<double> euclidean_distance(const ScalarField& grid, const Mask& source) {
  const int n = grid.dim();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d2(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) d2[k] = source[k] ? 0.0 : inf;
  const GridIndex& shape = grid.shape();
  for (int axis = 0; axis < n; ++axis) {
    const int len = shape[axis];
    std::size_t stride = 1;
    for (int i = axis + 1; i < kMaxDim; ++i) stride *= static_cast<std::size_t>(shape[i]);
    std::vector<double> line(len), out(len);
    for (std::size_t base = 0; base < grid.size(); ++base) {
      // Visit each line once, from the sample whose coordinate along `axis` is 0.
      if ((base / stride) % static_cast<std::size_t>(len) != 0) continue;
      for (int q = 0; q < len; ++q) line[q] = d2[base + q * stride];
      squared_distance_1d(line, out, grid.spacing()[axis]);
      for (int q = 0; q < len; ++q) d2[base + q * stride] = out[q];
    }
  }
  for (auto& v : d2) v = std::sqrt(v);
  return d2;
}

inline std::vector<GridIndex> graph_neighbours(int dim) {
  std::vector<GridIndex> out;
  GridIndex v{};
  for (v[0] = -1; v[0] <= 1; ++v[0])
    for (v[1] = (dim > 1 ? -1 : 0); v[1] <= (dim > 1 ? 1 : 0); ++v[1])
      for (v[2] = (dim > 2 ? -1 : 0); v[2] <= (dim > 2 ? 1 : 0); ++v[2])
        if (v != GridIndex{}) out.push_back(v);
  return out;
}

inline std::vector<double> graph_distance(const ScalarField& grid, const Mask& source) {
  const int n = grid.dim();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(grid.size(), inf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (source[k]) {
      d[k] = 0.0;
      queue.push({0.0, k});
    }
  const auto steps = graph_neighbours(n);
  std::vector<double> lengths;
  for (const auto& s : steps) lengths.push_back(offset_length(grid, s));
  while (!queue.empty()) {
    const auto [dk, k] = queue.top();
    queue.pop();
    if (dk > d[k]) continue;
    const GridIndex g = grid.index(k);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      GridIndex t = g;
      for (int a = 0; a < n; ++a) t[a] += steps[i][a];
      if (!grid.valid(t)) continue;
      const std::size_t kt = grid.flat(t);
      const double cand = dk + lengths[i];
      if (cand < d[kt]) {
        d[kt] = cand;
        queue.push({cand, kt});
      }
    }
  }
  return d;
}

}  // namespace detail

/// Distance from every valid sample to the marked samples; invalid samples stay invalid.
/// Samples unreachable in the grid graph get +inf, which a ScalarField cannot hold, so that
/// case is an InputError.
inline ScalarField distance_to(const ScalarField& grid, const Mask& source, MetricKind metric) {
  if (source.size() != grid.size()) throw InputError("mask length does not match the grid");
  if (std::none_of(source.begin(), source.end(), [](std::uint8_t b) { return b != 0; }))
    throw InputError("distance to an empty set");
  std::vector<double> d =
      metric == MetricKind::euclidean ? detail::euclidean_distance(grid, source) : detail::graph_distance(grid, source);
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (!grid.valid(k)) {
      d[k] = 0.0;
    } else if (!std::isfinite(d[k])) {
      throw InputError("sample " + format_index(grid.index(k), grid.dim()) + " is not connected to the source set");
    }
  }
  return grid.with_values(std::move(d));
}

struct DistanceField {
  ScalarField field;
  MetricKind metric = MetricKind::euclidean;
  ClosedMask source;
};

inline DistanceField distance_field(const ClosedMask& mask, MetricKind metric = MetricKind::euclidean) {
  return {distance_to(mask.grid(), mask.bits(), metric), metric, mask};
}

/// Samples of S with a valid axis neighbour outside S.
inline Mask boundary_of(const ScalarField& grid, const Mask& S) {
  const int n = grid.dim();
  Mask out(grid.size(), 0);
  for_each_valid(grid, [&](std::size_t k) {
    if (!S[k]) return;
    const GridIndex g = grid.index(k);
    for (int i = 0; i < n && !out[k]; ++i)
      for (int step : {-1, 1}) {
        GridIndex t = g;
        t[i] += step;
        if (grid.valid(t) && !S[grid.flat(t)]) {
          out[k] = 1;
          break;
        }
      }
  });
  return out;
}

/// Samples of S that are not on its boundary.
inline Mask interior_of(const ScalarField& grid, const Mask& S) {
  const Mask b = boundary_of(grid, S);
  Mask out(grid.size(), 0);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (S[k] && !b[k]) ? 1 : 0;
  return out;
}

inline bool any_of(const Mask& m) {
  return std::any_of(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; });
}

/// min over the samples of `set` of a field; +inf for an empty set.
inline double min_over(const ScalarField& d, const Mask& set) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < set.size(); ++k)
    if (set[k] && d.valid(k)) best = std::min(best, d[k]);
  return best;
}

struct Tube {
  /// {d < r}
  Mask open;
  /// {d <= r}
  Mask closed;
  /// Boundary samples of the closed tube.
  Mask boundary;
  double r = 0.0;
  /// max |d - r| over the boundary samples; one cell or less when the closure identity holds.
  double boundary_level_error = 0.0;
  /// Closed-tube samples that are neither in the open tube nor axis-adjacent to it.
  std::size_t closure_violations = 0;
};

inline Tube tube(const DistanceField& d, double r) {
  const ScalarField& f = d.field;
  if (!(r > 0.0)) throw InputError("tube radius must be positive");
  if (r < f.max_spacing())
    throw ResolutionError("tube radius " + format_double(r) + " is below the grid spacing " +
                          format_double(f.max_spacing()));
  Tube t;
  t.r = r;
  t.open.assign(f.size(), 0);
  t.closed.assign(f.size(), 0);
  for_each_valid(f, [&](std::size_t k) {
    t.open[k] = f[k] < r ? 1 : 0;
    t.closed[k] = f[k] <= r ? 1 : 0;
  });
  t.boundary = boundary_of(f, t.closed);
  for (std::size_t k = 0; k < f.size(); ++k)
    if (t.boundary[k]) t.boundary_level_error = std::max(t.boundary_level_error, std::abs(f[k] - r));
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (!t.closed[k] || t.open[k]) continue;
    const GridIndex g = f.index(k);
    bool adjacent = false;
    for (int i = 0; i < f.dim() && !adjacent; ++i)
      for (int step : {-1, 1}) {
        GridIndex q = g;
        q[i] += step;
        if (f.valid(q) && t.open[f.flat(q)]) adjacent = true;
      }
    if (!adjacent) ++t.closure_violations;
  }
  return t;
}

/// Default tolerance of the grid-scale identities: 1.5 cells.
inline double identity_tolerance(const ScalarField& grid) { return 1.5 * grid.max_spacing(); }

struct IdentityCheck {
  std::string name;
  /// Largest |lhs - rhs| (or the most negative slack for inequalities).
  double error = 0.0;
  double tolerance = 0.0;
  std::size_t samples = 0;
  GridIndex worst{};
  bool ok = true;
};

inline json identity_to_json(const IdentityCheck& c, int dim) {
  return {{"name", c.name},         {"error", c.error}, {"tolerance", c.tolerance},
          {"samples", c.samples},   {"worst", index_to_json(c.worst, dim)},
          {"ok", c.ok}};
}

/// d(x, C) = d(x, boundary C) for every sample outside the interior of C.
inline IdentityCheck check_boundary_distance(const ClosedMask& C, MetricKind metric) {
  const ScalarField& grid = C.grid();
  const ScalarField dC = distance_to(grid, C.bits(), metric);
  const Mask bC = boundary_of(grid, C.bits());
  IdentityCheck out{"boundary-distance", 0.0, identity_tolerance(grid)};
  if (!any_of(bC)) return out;  // C is the whole grid: no sample outside its interior
  const ScalarField dB = distance_to(grid, bC, metric);
  const Mask inner = interior_of(grid, C.bits());
  for_each_valid(grid, [&](std::size_t k) {
    if (inner[k]) return;
    ++out.samples;
    const double e = std::abs(dC[k] - dB[k]);
    if (e > out.error) {
      out.error = e;
      out.worst = grid.index(k);
    }
  });
  out.ok = out.error <= out.tolerance;
  return out;
}

/// d(x, C) = d(x, boundary V_r(C)) + r for every sample outside V_r(C).
inline IdentityCheck check_tube_distance(const ClosedMask& C, double r, MetricKind metric) {
  const DistanceField dC = distance_field(C, metric);
  const Tube t = tube(dC, r);
  const ScalarField& grid = C.grid();
  IdentityCheck out{"tube-distance", 0.0, identity_tolerance(grid)};
  if (!any_of(t.boundary)) return out;
  const ScalarField dB = distance_to(grid, t.boundary, metric);
  for_each_valid(grid, [&](std::size_t k) {
    if (t.open[k]) return;
    ++out.samples;
    const double e = std::abs(dC.field[k] - (dB[k] + r));
    if (e > out.error) {
      out.error = e;
      out.worst = grid.index(k);
    }
  });
  out.ok = out.error <= out.tolerance;
  return out;
}

/// The boundary of the closed tube sits on {d = r}, and the closed tube is the closure of the open one.
inline IdentityCheck check_tube_closure(const ClosedMask& C, double r, MetricKind metric) {
  const Tube t = tube(distance_field(C, metric), r);
  const ScalarField& grid = C.grid();
  IdentityCheck out{"tube-closure", t.boundary_level_error, identity_tolerance(grid)};
  for (std::size_t k = 0; k < t.boundary.size(); ++k) out.samples += t.boundary[k];
  out.ok = t.boundary_level_error <= out.tolerance && t.closure_violations == 0;
  return out;
}

/// d(A, B) = r + d(B, V_r(A)) = r + d(B, boundary V_r(A)) for 0 < r <= d(A, B).
inline IdentityCheck check_tube_gap(const ClosedMask& A, const ClosedMask& B, double r, MetricKind metric) {
  const ScalarField& grid = A.grid();
  const DistanceField dA = distance_field(A, metric);
  const double dAB = min_over(dA.field, B.bits());
  if (!(r > 0.0 && r <= dAB))
    throw PreconditionError("tube radius " + format_double(r) + " must lie in (0, d(A,B)] = (0, " + format_double(dAB) +
                            "]");
  const Tube t = tube(dA, r);
  IdentityCheck out{"tube-gap", 0.0, identity_tolerance(grid)};
  out.samples = B.count();
  const double to_open = min_over(distance_to(grid, t.open, metric), B.bits());
  double to_boundary = to_open;
  if (any_of(t.boundary)) to_boundary = min_over(distance_to(grid, t.boundary, metric), B.bits());
  out.error = std::max(std::abs(dAB - (r + to_open)), std::abs(dAB - (r + to_boundary)));
  out.ok = out.error <= out.tolerance;
  return out;
}

struct MetricLemmaReport {
  double d_AB = 0.0;
  double d_A_boundary = 0.0;
  double d_boundary_B = 0.0;
  /// d(A,B) - d(A, boundary S) - d(boundary S, B); nonnegative in a length space.
  double slack = 0.0;
  double tolerance = 0.0;
  bool ok = true;
};

inline json metric_lemma_to_json(const MetricLemmaReport& r) {
  return {{"d_AB", r.d_AB},   {"d_A_boundary", r.d_A_boundary}, {"d_boundary_B", r.d_boundary_B},
          {"slack", r.slack}, {"tolerance", r.tolerance},       {"ok", r.ok}};
}

/// d(A, B) >= d(A, boundary S) + d(boundary S, B), given A in S and B disjoint from the interior of S.
inline MetricLemmaReport check_metric_lemma(const ClosedMask& A, const ClosedMask& B, const ClosedMask& S,
                                            MetricKind metric) {
  const ScalarField& grid = A.grid();
  if (!B.grid().same_grid(grid) || !S.grid().same_grid(grid)) throw InputError("masks live on different grids");
  for (std::size_t k = 0; k < A.size(); ++k)
    if (A[k] && !S[k])
      throw PreconditionError("A is not contained in the closure of S (sample " +
                              format_index(grid.index(k), grid.dim()) + ")");
  const Mask inner = interior_of(grid, S.bits());
  for (std::size_t k = 0; k < B.size(); ++k)
    if (B[k] && inner[k])
      throw PreconditionError("B meets the interior of S (sample " + format_index(grid.index(k), grid.dim()) + ")");
  const Mask bS = boundary_of(grid, S.bits());
  if (!any_of(bS)) throw PreconditionError("S has an empty boundary");

  MetricLemmaReport r;
  r.d_AB = min_over(distance_to(grid, A.bits(), metric), B.bits());
  const ScalarField dB = distance_to(grid, bS, metric);
  r.d_A_boundary = min_over(dB, A.bits());
  r.d_boundary_B = min_over(dB, B.bits());
  r.slack = r.d_AB - r.d_A_boundary - r.d_boundary_B;
  r.tolerance = identity_tolerance(grid);
  r.ok = r.slack >= -r.tolerance;
  return r;
}

}  // namespace smooth_insert
