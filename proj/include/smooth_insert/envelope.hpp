#pragma once

// Lower convex envelope of a sampled function: the largest convex function below
// the finite sample cloud {(y_i, f_i)}.
//
// n = 1: monotone lower-hull stack.
// n = 2: lower hull of the lifted cloud in R^3 (quickhull), evaluated back at samples
//        with exact integer barycentrics.
// n = 3: one linear program per sample, warm-started along the sweep.
// The LP oracle answers single queries from a cold start and doubles as a cross-check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "field.hpp"
#include "field_io.hpp"
#include "hull.hpp"
#include "lp.hpp"

namespace smooth_insert {

/// Affine map y -> gradient . y + intercept.
struct AffineFacet {
  Point gradient{};
  double intercept = 0.0;
  /// Flat indices of the samples spanning the facet.
  std::vector<std::size_t> vertices;

  double operator()(const Point& y, int dim) const {
    double v = intercept;
    for (int i = 0; i < dim; ++i) v += gradient[i] * y[i];
    return v;
  }
};

struct ConvexCombination {
  Point query{};
  std::vector<std::size_t> samples;
  std::vector<Point> points;
  std::vector<double> weights;
  double value = 0.0;
};

struct EnvelopeOptions {
  /// Relative to the input's value scale.
  double tol_env = 1e-9;
  bool witnesses = true;
  std::uint64_t seed = 0x5eed5eedULL;
};

struct EnvelopeResult {
  ScalarField envelope;
  Mask contact_mask;
  std::vector<AffineFacet> facets;
  /// Indexed by flat sample index; empty for invalid samples or when not requested.
  std::vector<std::optional<ConvexCombination>> witnesses;
  std::string method;
  /// Absolute tolerance used for contact and invariants.
  double tolerance = 0.0;
};

namespace detail {

inline ConvexCombination make_combination(const ScalarField& f, std::size_t query,
                                          const std::vector<std::pair<std::size_t, double>>& terms) {
  ConvexCombination c;
  c.query = f.point(query);
  for (const auto& [k, w] : terms) {
    if (w <= 0.0) continue;
    c.samples.push_back(k);
    c.points.push_back(f.point(k));
    c.weights.push_back(w);
    c.value += w * f[k];
  }
  return c;
}

inline AffineFacet facet_through(const ScalarField& f, const std::vector<std::size_t>& ids) {
  const int n = f.dim();
  AffineFacet facet;
  facet.vertices = ids;
  const Point p0 = f.point(ids[0]);
  if (n == 1) {
    const Point p1 = f.point(ids[1]);
    facet.gradient[0] = (f[ids[1]] - f[ids[0]]) / (p1[0] - p0[0]);
  } else {
    const Point p1 = f.point(ids[1]), p2 = f.point(ids[2]);
    const double a = p1[0] - p0[0], b = p1[1] - p0[1], c = p2[0] - p0[0], d = p2[1] - p0[1];
    const double r1 = f[ids[1]] - f[ids[0]], r2 = f[ids[2]] - f[ids[0]];
    const double det = a * d - b * c;
    facet.gradient[0] = (r1 * d - b * r2) / det;
    facet.gradient[1] = (a * r2 - r1 * c) / det;
  }
  facet.intercept = f[ids[0]];
  for (int i = 0; i < n; ++i) facet.intercept -= facet.gradient[i] * p0[i];
  return facet;
}

inline void finish(const ScalarField& f, std::vector<double>& env, EnvelopeResult& out) {
  out.contact_mask.assign(f.size(), 0);
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (!f.valid(k)) continue;
    env[k] = std::min(env[k], f[k]);
    out.contact_mask[k] = std::abs(f[k] - env[k]) <= out.tolerance ? 1 : 0;
  }
  out.envelope = f.with_values(std::move(env));
}

/// Throws RankError unless the valid samples affinely span the grid dimension.
inline void require_full_rank(const ScalarField& f) {
  const int n = f.dim();
  std::vector<GridIndex> basis;
  std::optional<GridIndex> origin;
  for (std::size_t k = 0; k < f.size() && static_cast<int>(basis.size()) < n; ++k) {
    if (!f.valid(k)) continue;
    const GridIndex g = f.index(k);
    if (!origin) {
      origin = g;
      continue;
    }
    GridIndex d{};
    for (int i = 0; i < n; ++i) d[i] = g[i] - (*origin)[i];
    // Accept d if it is independent of the vectors collected so far.
    std::array<std::array<double, 3>, 3> m{};
    for (std::size_t r = 0; r < basis.size(); ++r)
      for (int i = 0; i < 3; ++i) m[r][i] = basis[r][i];
    for (int i = 0; i < 3; ++i) m[basis.size()][i] = d[i];
    const std::size_t rows = basis.size() + 1;
    bool independent;
    if (rows == 1) {
      independent = d != GridIndex{};
    } else if (rows == 2) {
      const Vec3 c = cross3(m[0], m[1]);
      independent = dot3(c, c) > 0.0;
    } else {
      independent = dot3(cross3(m[0], m[1]), m[2]) != 0.0;
    }
    if (independent) basis.push_back(d);
  }
  if (!origin) throw InputError("field has no valid samples");
  if (static_cast<int>(basis.size()) < n)
    throw RankError("valid samples do not affinely span dimension " + std::to_string(n));
}

}  // namespace detail

inline EnvelopeResult lower_convex_envelope_1d(const ScalarField& f, const EnvelopeOptions& opts = {}) {
  if (f.dim() != 1) throw InputError("lower_convex_envelope_1d needs a 1D field");
  if (f.valid_count() < 2) throw InputError("envelope needs at least 2 valid samples");
  EnvelopeResult out{f, {}, {}, {}, "hull-1d", opts.tol_env * value_scale(f)};

  std::vector<std::size_t> hull;
  auto turn = [&](std::size_t a, std::size_t b, std::size_t c) {
    const double ax = static_cast<double>(a), bx = static_cast<double>(b), cx = static_cast<double>(c);
    return (bx - ax) * (f[c] - f[a]) - (f[b] - f[a]) * (cx - ax);
  };
  for_each_valid(f, [&](std::size_t k) {
    while (hull.size() >= 2 && turn(hull[hull.size() - 2], hull.back(), k) <= 0.0) hull.pop_back();
    hull.push_back(k);
  });

  std::vector<double> env(f.size(), 0.0);
  if (opts.witnesses) out.witnesses.assign(f.size(), std::nullopt);
  for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
    const std::size_t a = hull[h], b = hull[h + 1];
    out.facets.push_back(detail::facet_through(f, {a, b}));
    const bool last = h + 2 == hull.size();
    for (std::size_t k = a; k < b + (last ? 1 : 0); ++k) {
      if (!f.valid(k)) continue;
      const double wb = static_cast<double>(k - a) / static_cast<double>(b - a);
      const double wa = 1.0 - wb;
      env[k] = k == a ? f[a] : (k == b ? f[b] : wa * f[a] + wb * f[b]);
      if (opts.witnesses) {
        if (k == a || k == b)
          out.witnesses[k] = detail::make_combination(f, k, {{k, 1.0}});
        else
          out.witnesses[k] = detail::make_combination(f, k, {{a, wa}, {b, wb}});
      }
    }
  }
  detail::finish(f, env, out);
  return out;
}

namespace detail {

/// Merges edge-adjacent triangles carrying the same affine function (the perturbation
/// triangulates flat pieces arbitrarily).
inline std::vector<AffineFacet> merge_coplanar(const ScalarField& f, std::vector<AffineFacet> tris, double tol) {
  const int n = f.dim();
  std::vector<std::size_t> parent(tris.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::unordered_map<std::uint64_t, std::size_t> by_edge;
  auto agrees = [&](const AffineFacet& a, const AffineFacet& b) {
    for (std::size_t v : b.vertices)
      if (std::abs(a(f.point(v), n) - f[v]) > tol) return false;
    return true;
  };
  for (std::size_t t = 0; t < tris.size(); ++t)
    for (int e = 0; e < 3; ++e) {
      std::size_t a = tris[t].vertices[e], b = tris[t].vertices[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
      const auto [it, inserted] = by_edge.emplace(key, t);
      if (inserted) continue;
      const std::size_t u = it->second;
      if (agrees(tris[u], tris[t]) && agrees(tris[t], tris[u])) parent[root(t)] = root(u);
    }
  std::vector<AffineFacet> out;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const std::size_t r = root(t);
    const auto [it, inserted] = slot.emplace(r, out.size());
    if (inserted) {
      out.push_back(tris[r]);
      out.back().vertices.clear();
    }
    auto& verts = out[it->second].vertices;
    verts.insert(verts.end(), tris[t].vertices.begin(), tris[t].vertices.end());
  }
  for (auto& facet : out) {
    std::sort(facet.vertices.begin(), facet.vertices.end());
    facet.vertices.erase(std::unique(facet.vertices.begin(), facet.vertices.end()), facet.vertices.end());
  }
  return out;
}

inline std::int64_t orient2(std::int64_t ax, std::int64_t ay, std::int64_t bx, std::int64_t by, std::int64_t cx,
                            std::int64_t cy) {
  return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

/// Twice the area of the convex hull of the valid sample indices.
inline std::int64_t index_hull_area2(const ScalarField& f) {
  std::vector<std::pair<std::int64_t, std::int64_t>> p;
  for_each_valid(f, [&](std::size_t k) {
    const GridIndex g = f.index(k);
    p.emplace_back(g[0], g[1]);
  });
  std::sort(p.begin(), p.end());
  std::vector<std::pair<std::int64_t, std::int64_t>> h(2 * p.size());
  std::size_t m = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (m >= 2 && orient2(h[m - 2].first, h[m - 2].second, h[m - 1].first, h[m - 1].second, p[i].first,
                             p[i].second) <= 0)
      --m;
    h[m++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = m + 1; i-- > 0;) {
    while (m >= t && orient2(h[m - 2].first, h[m - 2].second, h[m - 1].first, h[m - 1].second, p[i].first,
                             p[i].second) <= 0)
      --m;
    h[m++] = p[i];
  }
  std::int64_t area2 = 0;
  for (std::size_t i = 0; i + 1 < m; ++i) area2 += h[i].first * h[i + 1].second - h[i + 1].first * h[i].second;
  return std::abs(area2);
}

/// A sample lying on or above the chord between two lattice neighbours can never be
/// a vertex of the lower hull, so it is left out of the lifted cloud.
inline Mask hull_candidates(const ScalarField& f) {
  static constexpr std::array<std::array<int, 2>, 4> dirs = {{{1, 0}, {0, 1}, {1, 1}, {1, -1}}};
  Mask keep(f.size(), 0);
  for_each_valid(f, [&](std::size_t k) {
    const GridIndex g = f.index(k);
    bool extreme = true;
    for (const auto& d : dirs) {
      const GridIndex a = {g[0] + d[0], g[1] + d[1], 0}, b = {g[0] - d[0], g[1] - d[1], 0};
      if (f.valid(a) && f.valid(b) && 2.0 * f[k] >= f[f.flat(a)] + f[f.flat(b)]) {
        extreme = false;
        break;
      }
    }
    keep[k] = extreme ? 1 : 0;
  });
  return keep;
}

inline EnvelopeResult hull_envelope_2d(const ScalarField& f, const EnvelopeOptions& opts, std::uint64_t seed) {
  EnvelopeResult out{f, {}, {}, {}, "lifted-hull-2d", opts.tol_env * value_scale(f)};
  const auto [lo, hi] = value_range(f);
  const double extent = static_cast<double>(std::max(f.shape()[0], f.shape()[1]) - 1);
  const double zscale = hi > lo ? extent / (hi - lo) : 0.0;

  Mask keep = hull_candidates(f);
  if (std::count(keep.begin(), keep.end(), 1) < 4)
    for_each_valid(f, [&](std::size_t k) { keep[k] = 1; });

  // z is rescaled to the index extent and jittered; the jitter breaks coplanar ties
  // and stays far below the envelope tolerance.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.0, 1e-10 * extent);
  std::vector<Vec3> pts;
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (!keep[k]) continue;
    const GridIndex g = f.index(k);
    pts.push_back({static_cast<double>(g[0]), static_cast<double>(g[1]), (f[k] - lo) * zscale + jitter(rng)});
    ids.push_back(k);
  }

  const Quickhull hull(pts);
  std::vector<double> env(f.size(), 0.0);
  Mask done(f.size(), 0);
  if (opts.witnesses) out.witnesses.assign(f.size(), std::nullopt);

  std::vector<std::array<std::size_t, 3>> tris;
  std::int64_t area_sum = 0;
  for (const auto& tri : hull.lower_faces()) {
    std::array<std::int64_t, 3> x{}, y{};
    for (int c = 0; c < 3; ++c) {
      x[c] = static_cast<std::int64_t>(pts[tri[c]][0]);
      y[c] = static_cast<std::int64_t>(pts[tri[c]][1]);
    }
    const std::int64_t area = orient2(x[0], y[0], x[1], y[1], x[2], y[2]);
    if (area == 0) continue;
    area_sum += std::abs(area);
    const std::array<std::size_t, 3> v = {ids[tri[0]], ids[tri[1]], ids[tri[2]]};
    tris.push_back(v);
    out.facets.push_back(facet_through(f, {v[0], v[1], v[2]}));

    const std::int64_t x0 = std::min({x[0], x[1], x[2]}), x1 = std::max({x[0], x[1], x[2]});
    const std::int64_t y0 = std::min({y[0], y[1], y[2]}), y1 = std::max({y[0], y[1], y[2]});
    for (std::int64_t i = x0; i <= x1; ++i)
      for (std::int64_t j = y0; j <= y1; ++j) {
        const std::int64_t w0 = orient2(i, j, x[1], y[1], x[2], y[2]);
        const std::int64_t w1 = orient2(x[0], y[0], i, j, x[2], y[2]);
        const std::int64_t w2 = orient2(x[0], y[0], x[1], y[1], i, j);
        const bool inside = area < 0 ? (w0 <= 0 && w1 <= 0 && w2 <= 0) : (w0 >= 0 && w1 >= 0 && w2 >= 0);
        if (!inside) continue;
        const std::size_t k = f.flat({static_cast<int>(i), static_cast<int>(j), 0});
        if (!f.valid(k) || done[k]) continue;
        done[k] = 1;
        const std::array<double, 3> w = {static_cast<double>(w0) / area, static_cast<double>(w1) / area,
                                         static_cast<double>(w2) / area};
        double val = 0.0;
        std::vector<std::pair<std::size_t, double>> terms;
        for (int c = 0; c < 3; ++c) {
          if (w[c] == 0.0) continue;
          if (w[c] == 1.0) {
            val = f[v[c]];
            terms.assign(1, {v[c], 1.0});
            break;
          }
          val += w[c] * f[v[c]];
          terms.push_back({v[c], w[c]});
        }
        env[k] = val;
        if (opts.witnesses) out.witnesses[k] = make_combination(f, k, terms);
      }
  }

  // Certificate: the lower faces tile the hull of the samples, the surface they span is
  // locally convex across every shared edge, and it never exceeds the data. Together
  // these make it the discrete envelope; any failure sends the caller to a retry.
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f.valid(k) && !done[k]) throw InvariantError("lower hull does not cover sample " + format_index(f.index(k), 2));
  if (area_sum != index_hull_area2(f)) throw InvariantError("lower hull faces do not tile the sample hull");
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f.valid(k) && env[k] > f[k] + out.tolerance)
      throw InvariantError("lower hull lies above sample " + format_index(f.index(k), 2));
  std::unordered_map<std::uint64_t, std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t t = 0; t < tris.size(); ++t)
    for (int e = 0; e < 3; ++e) {
      std::size_t a = tris[t][e], b = tris[t][(e + 1) % 3];
      if (a > b) std::swap(a, b);
      const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
      const auto [it, inserted] = edges.emplace(key, std::pair<std::size_t, std::size_t>{t, tris.size()});
      if (inserted) continue;
      if (it->second.second != tris.size()) throw InvariantError("lower hull edge shared by more than two faces");
      it->second.second = t;
    }
  for (const auto& [key, pair] : edges) {
    if (pair.second == tris.size()) continue;
    const std::size_t a = key >> 32, b = key & 0xffffffffULL;
    for (const auto& [s, t] : {pair, std::pair{pair.second, pair.first}}) {
      for (std::size_t v : tris[t]) {
        if (v == a || v == b) continue;
        if (out.facets[s](f.point(v), 2) > f[v] + out.tolerance)
          throw InvariantError("lower hull is not convex across an edge");
      }
    }
  }

  out.facets = merge_coplanar(f, std::move(out.facets), out.tolerance);
  finish(f, env, out);
  return out;
}

}  // namespace detail

/// Single-query LP oracle over all valid samples of a field.
class EnvelopeOracle {
 public:
  struct Answer {
    double value = 0.0;
    ConvexCombination witness;
    /// Supporting affine minorant certified by the LP duals, in physical coordinates.
    AffineFacet support;
    std::vector<int> basis;
    int pivots = 0;
  };

  explicit EnvelopeOracle(const ScalarField& f) : field_(f), column_of_(f.size(), -1) {
    std::vector<Point> coords;
    std::vector<double> costs;
    for_each_valid(f, [&](std::size_t k) {
      const GridIndex g = f.index(k);
      Point t{};
      for (int i = 0; i < f.dim(); ++i) t[i] = g[i];
      column_of_[k] = static_cast<int>(sample_of_.size());
      sample_of_.push_back(k);
      coords.push_back(t);
      costs.push_back(f[k]);
    });
    if (sample_of_.empty()) throw InputError("field has no valid samples");
    lp_.emplace(f.dim(), std::move(coords), std::move(costs));
  }

  const ScalarField& field() const { return field_; }

  /// Grid coordinates (fractional indices) of a physical point.
  Point grid_coordinates(const Point& p) const {
    Point t{};
    for (int i = 0; i < field_.dim(); ++i) {
      t[i] = (p[i] - field_.domain().lower()[i]) / field_.spacing()[i];
      if (std::abs(t[i] - std::round(t[i])) < 1e-9) t[i] = std::round(t[i]);
    }
    return t;
  }

  /// Cold query: starts from the Kuhn simplex of the enclosing cell when its vertices
  /// are valid, otherwise from phase one.
  Answer query(const Point& p) const { return solve(p, kuhn_basis(grid_coordinates(p))); }

  /// Query with an explicit starting basis (column ids); falls back as in query().
  Answer query_warm(const Point& p, const std::vector<int>& warm) const {
    return solve(p, warm.empty() ? kuhn_basis(grid_coordinates(p)) : warm);
  }

 private:
  std::vector<int> kuhn_basis(const Point& t) const {
    const int n = field_.dim();
    GridIndex base{};
    std::array<double, kMaxDim> frac{};
    for (int i = 0; i < n; ++i) {
      if (t[i] < -1e-9 || t[i] > field_.shape()[i] - 1 + 1e-9) return {};
      base[i] = std::clamp(static_cast<int>(std::floor(t[i])), 0, field_.shape()[i] - 2);
      frac[i] = std::clamp(t[i] - base[i], 0.0, 1.0);
    }
    std::array<int, kMaxDim> order{0, 1, 2};
    std::stable_sort(order.begin(), order.begin() + n, [&](int a, int b) { return frac[a] > frac[b]; });
    std::vector<int> basis;
    GridIndex g = base;
    for (int step = 0; step <= n; ++step) {
      if (step > 0) ++g[order[step - 1]];
      if (!field_.valid(g)) return {};
      basis.push_back(column_of_[field_.flat(g)]);
    }
    return basis;
  }

  Answer solve(const Point& p, const std::vector<int>& warm) const {
    const int n = field_.dim();
    const Point t = grid_coordinates(p);
    const auto sol = lp_->solve(t, warm);
    Answer a;
    a.value = sol.value;
    a.basis = sol.basis;
    a.pivots = sol.pivots;
    a.witness.query = p;
    double total = 0.0;
    for (std::size_t r = 0; r < sol.basis.size(); ++r) total += sol.weights[r];
    for (std::size_t r = 0; r < sol.basis.size(); ++r) {
      const double w = sol.weights[r] / total;
      if (w <= 1e-15) continue;
      const std::size_t k = sample_of_[sol.basis[r]];
      a.witness.samples.push_back(k);
      a.witness.points.push_back(field_.point(k));
      a.witness.weights.push_back(w);
      a.witness.value += w * field_[k];
    }
    a.support.intercept = sol.dual[n];
    for (int i = 0; i < n; ++i) {
      a.support.gradient[i] = sol.dual[i] / field_.spacing()[i];
      a.support.intercept -= sol.dual[i] * field_.domain().lower()[i] / field_.spacing()[i];
    }
    a.support.vertices = a.witness.samples;
    return a;
  }

  const ScalarField& field_;
  std::vector<int> column_of_;
  std::vector<std::size_t> sample_of_;
  std::optional<EnvelopeLp> lp_;
};

/// Minimises sum w_i f_i subject to sum w_i y_i = p, sum w_i = 1, w >= 0.
inline std::pair<double, ConvexCombination> envelope_lp_oracle(const ScalarField& f, const Point& p) {
  const EnvelopeOracle oracle(f);
  auto a = oracle.query(p);
  return {a.value, std::move(a.witness)};
}

namespace detail {

inline EnvelopeResult lp_envelope(const ScalarField& f, const EnvelopeOptions& opts) {
  EnvelopeResult out{f, {}, {}, {}, "lp-sweep", opts.tol_env * value_scale(f)};
  const EnvelopeOracle oracle(f);
  std::vector<double> env(f.size(), 0.0);
  if (opts.witnesses) out.witnesses.assign(f.size(), std::nullopt);
  std::vector<int> previous;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (!f.valid(k)) continue;
    // Try the previous optimal basis first; the LP discards it if infeasible here.
    auto a = oracle.query_warm(f.point(k), previous);
    previous = a.basis;
    env[k] = a.value;
    if (opts.witnesses) out.witnesses[k] = std::move(a.witness);
  }
  finish(f, env, out);
  return out;
}

}  // namespace detail

/// Lifted lower hull for n = 2, LP sweep for n = 3.
inline EnvelopeResult lower_convex_envelope_nd(const ScalarField& f, const EnvelopeOptions& opts = {}) {
  if (f.dim() < 2) throw InputError("lower_convex_envelope_nd needs a 2D or 3D field");
  detail::require_full_rank(f);
  if (f.dim() == 3) return detail::lp_envelope(f, opts);
  for (std::uint64_t attempt = 0; attempt < 3; ++attempt) {
    try {
      return detail::hull_envelope_2d(f, opts, opts.seed + attempt);
    } catch (const InvariantError&) {
      // Retry with a different perturbation; the LP sweep is the last resort.
    }
  }
  auto out = detail::lp_envelope(f, opts);
  out.method = "lp-sweep-fallback";
  return out;
}

inline EnvelopeResult lower_convex_envelope(const ScalarField& f, const EnvelopeOptions& opts = {}) {
  return f.dim() == 1 ? lower_convex_envelope_1d(f, opts) : lower_convex_envelope_nd(f, opts);
}

inline json facet_to_json(const AffineFacet& a, int dim) {
  return {{"gradient", point_to_json(a.gradient, dim)}, {"intercept", a.intercept}, {"vertices", a.vertices}};
}

inline json envelope_to_json(const EnvelopeResult& r) {
  json j = field_to_json(r.envelope);
  j["contact_mask"] = mask_to_json(r.contact_mask);
  json facets = json::array();
  for (const auto& a : r.facets) facets.push_back(facet_to_json(a, r.envelope.dim()));
  j["facets"] = std::move(facets);
  j["method"] = r.method;
  return j;
}

/// CSV rows: query point, then (support point, weight) pairs.
inline std::string witnesses_to_csv(const EnvelopeResult& r) {
  const int n = r.envelope.dim();
  std::string s = "query,value,support\n";
  for (const auto& w : r.witnesses) {
    if (!w) continue;
    std::string row = "\"" + format_point(w->query, n) + "\"," + format_double(w->value) + ",\"";
    for (std::size_t i = 0; i < w->weights.size(); ++i)
      row += (i ? " " : "") + format_point(w->points[i], n) + ":" + format_double(w->weights[i]);
    s += row + "\"\n";
  }
  return s;
}

struct CoercivityOptions {
  /// Required excess of the boundary minimum over the interior maximum.
  double margin = 0.0;
  /// When set, tests whether the sublevel set {f <= level} stays off the boundary layer.
  std::optional<double> level;
};

struct CoercivityReport {
  double boundary_min = std::numeric_limits<double>::infinity();
  double interior_max = -std::numeric_limits<double>::infinity();
  std::size_t boundary_count = 0;
  std::size_t interior_count = 0;
  std::optional<double> level;
  bool sublevel_interior = false;
  bool coercive = false;
};

/// Boundary layer: valid samples with an invalid or out-of-grid axis neighbour.
/// Interior: valid samples whose whole 5^n neighbourhood is valid, so that the
/// comparison is not blurred by the staircase of a masked ball.
inline CoercivityReport check_coercive(const ScalarField& f, const CoercivityOptions& opts = {}) {
  const int n = f.dim();
  CoercivityReport rep;
  rep.level = opts.level;
  for_each_valid(f, [&](std::size_t k) {
    const GridIndex g = f.index(k);
    bool boundary = false;
    for (int i = 0; i < n && !boundary; ++i) {
      GridIndex up = g, down = g;
      ++up[i];
      --down[i];
      boundary = !f.valid(up) || !f.valid(down);
    }
    if (boundary) {
      rep.boundary_min = std::min(rep.boundary_min, f[k]);
      ++rep.boundary_count;
      return;
    }
    bool interior = true;
    GridIndex d{};
    for (d[0] = -2; d[0] <= 2 && interior; ++d[0])
      for (d[1] = (n > 1 ? -2 : 0); d[1] <= (n > 1 ? 2 : 0) && interior; ++d[1])
        for (d[2] = (n > 2 ? -2 : 0); d[2] <= (n > 2 ? 2 : 0) && interior; ++d[2]) {
          GridIndex h = g;
          for (int i = 0; i < n; ++i) h[i] += d[i];
          interior = f.valid(h);
        }
    if (interior) {
      rep.interior_max = std::max(rep.interior_max, f[k]);
      ++rep.interior_count;
    }
  });
  if (opts.level) {
    rep.sublevel_interior = rep.boundary_min > *opts.level;
    rep.coercive = rep.sublevel_interior;
  } else {
    rep.coercive = rep.boundary_count > 0 && rep.boundary_min > rep.interior_max + opts.margin;
  }
  return rep;
}

inline json coercivity_to_json(const CoercivityReport& r) {
  json j = {{"boundary_min", r.boundary_min},
            {"interior_max", std::isfinite(r.interior_max) ? json(r.interior_max) : json(nullptr)},
            {"boundary_count", r.boundary_count},
            {"interior_count", r.interior_count},
            {"coercive", r.coercive}};
  if (r.level) {
    j["level"] = *r.level;
    j["sublevel_interior"] = r.sublevel_interior;
  }
  return j;
}

/// Line fitted through the samples where a 2D field has concentrated curvature.
struct SingularLine {
  /// Unit normal with a positive first non-zero component; the line is normal . y = offset.
  Point normal{};
  double offset = 0.0;
  std::size_t sample_count = 0;
  /// Largest symmetric second difference found (unit axis and diagonal offsets).
  double peak_second_difference = 0.0;
  /// Mean |grad(y + 2d) - grad(y - 2d)| across the line, d the lattice step nearest the normal.
  double gradient_jump = 0.0;
  /// Root-mean-square distance of the singular samples from the fitted line.
  double residual = 0.0;
};

/// Samples whose largest unit second difference is at least `threshold` times the
/// field's peak count as singular; a line is fitted by principal components.
inline SingularLine measure_singular_line(const ScalarField& f, double threshold = 0.75) {
  if (f.dim() != 2) throw InputError("singular line measurement needs a 2D field");
  const std::array<GridIndex, 4> dirs = {GridIndex{1, 0, 0}, GridIndex{0, 1, 0}, GridIndex{1, 1, 0}, GridIndex{1, -1, 0}};
  std::vector<double> peak(f.size(), -std::numeric_limits<double>::infinity());
  double global = 0.0;
  for_each_valid(f, [&](std::size_t k) {
    const GridIndex g = f.index(k);
    for (const auto& d : dirs) {
      GridIndex a = g, b = g;
      for (int i = 0; i < 2; ++i) {
        a[i] += d[i];
        b[i] -= d[i];
      }
      if (!f.valid(a) || !f.valid(b)) continue;
      peak[k] = std::max(peak[k], second_difference(f, g, d));
    }
    global = std::max(global, peak[k]);
  });
  SingularLine line;
  line.peak_second_difference = global;
  if (!(global > 0.0)) throw EstimationError("field has no curvature concentration to fit");

  std::vector<Point> pts;
  std::vector<std::size_t> ks;
  for_each_valid(f, [&](std::size_t k) {
    if (peak[k] >= threshold * global) {
      pts.push_back(f.point(k));
      ks.push_back(k);
    }
  });
  line.sample_count = pts.size();
  if (pts.size() < 2) throw EstimationError("too few singular samples to fit a line");
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p[0];
    cy += p[1];
  }
  cx /= pts.size();
  cy /= pts.size();
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : pts) {
    sxx += (p[0] - cx) * (p[0] - cx);
    sxy += (p[0] - cx) * (p[1] - cy);
    syy += (p[1] - cy) * (p[1] - cy);
  }
  // The normal is the eigenvector of the smaller eigenvalue of the scatter matrix.
  const double tr = sxx + syy, det = sxx * syy - sxy * sxy;
  const double lmin = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  Point nrm{};
  if (std::abs(sxy) > 1e-14 * std::max(tr, 1e-300)) {
    nrm = {sxy, lmin - sxx, 0.0};
  } else {
    nrm = sxx <= syy ? Point{1.0, 0.0, 0.0} : Point{0.0, 1.0, 0.0};
  }
  const double len = norm(nrm, 2);
  nrm = {nrm[0] / len, nrm[1] / len, 0.0};
  if (nrm[0] < 0.0 || (nrm[0] == 0.0 && nrm[1] < 0.0)) nrm = {-nrm[0], -nrm[1], 0.0};
  line.normal = nrm;
  line.offset = nrm[0] * cx + nrm[1] * cy;
  double res = 0.0;
  for (const auto& p : pts) {
    const double r = nrm[0] * p[0] + nrm[1] * p[1] - line.offset;
    res += r * r;
  }
  line.residual = std::sqrt(res / pts.size());

  // Lattice step closest in angle to the normal, in index space.
  GridIndex step{};
  double best = -1.0;
  for (const auto& d : dirs)
    for (int s : {1, -1}) {
      const double vx = s * d[0] * f.spacing()[0], vy = s * d[1] * f.spacing()[1];
      const double c = (vx * nrm[0] + vy * nrm[1]) / std::hypot(vx, vy);
      if (c > best) {
        best = c;
        step = {s * d[0], s * d[1], 0};
      }
    }
  double jump = 0.0;
  std::size_t used = 0;
  for (std::size_t k : ks) {
    const GridIndex g = f.index(k);
    const GridIndex a = {g[0] + 2 * step[0], g[1] + 2 * step[1], 0};
    const GridIndex b = {g[0] - 2 * step[0], g[1] - 2 * step[1], 0};
    auto central = [&](const GridIndex& h) {
      for (int i = 0; i < 2; ++i) {
        GridIndex u = h, d = h;
        ++u[i];
        --d[i];
        if (!f.valid(u) || !f.valid(d)) return false;
      }
      return f.valid(h);
    };
    if (!central(a) || !central(b)) continue;
    const Point ga = gradient_fd(f, a).value, gb = gradient_fd(f, b).value;
    jump += std::hypot(ga[0] - gb[0], ga[1] - gb[1]);
    ++used;
  }
  line.gradient_jump = used ? jump / used : 0.0;
  return line;
}

/// Post-hoc checks of an envelope result against its input.
struct EnvelopeAudit {
  /// max(env - f) over valid samples.
  double minorant_excess = 0.0;
  /// max(-(env(y+v) + env(y-v) - 2 env(y))) over axis and diagonal offsets, or 0.
  double convexity_defect = 0.0;
  /// max |env(env) - env|.
  double idempotence_gap = 0.0;
  std::size_t witness_count = 0;
  std::size_t witness_failures = 0;
  std::size_t max_support = 0;
  double tolerance = 0.0;

  bool ok() const {
    return minorant_excess <= tolerance && convexity_defect <= tolerance && idempotence_gap <= tolerance &&
           witness_failures == 0;
  }
};

inline EnvelopeAudit audit_envelope(const ScalarField& f, const EnvelopeResult& r, const EnvelopeOptions& opts = {}) {
  const int n = f.dim();
  const ScalarField& env = r.envelope;
  EnvelopeAudit a;
  a.tolerance = opts.tol_env * value_scale(f);
  for_each_valid(f, [&](std::size_t k) { a.minorant_excess = std::max(a.minorant_excess, env[k] - f[k]); });

  GridIndex d{};
  std::vector<GridIndex> dirs;
  for (d[0] = -1; d[0] <= 1; ++d[0])
    for (d[1] = (n > 1 ? -1 : 0); d[1] <= (n > 1 ? 1 : 0); ++d[1])
      for (d[2] = (n > 2 ? -1 : 0); d[2] <= (n > 2 ? 1 : 0); ++d[2])
        if (d > GridIndex{}) dirs.push_back(d);
  for_each_valid(env, [&](std::size_t k) {
    const GridIndex g = env.index(k);
    for (const auto& v : dirs) {
      GridIndex p = g, m = g;
      for (int i = 0; i < n; ++i) {
        p[i] += v[i];
        m[i] -= v[i];
      }
      if (!env.valid(p) || !env.valid(m)) continue;
      a.convexity_defect = std::max(a.convexity_defect, -(env[env.flat(p)] + env[env.flat(m)] - 2.0 * env[k]));
    }
  });

  const EnvelopeResult again = lower_convex_envelope(env, {opts.tol_env, false, opts.seed});
  for_each_valid(env, [&](std::size_t k) {
    a.idempotence_gap = std::max(a.idempotence_gap, std::abs(again.envelope[k] - env[k]));
  });

  double extent = 0.0;
  for (int i = 0; i < n; ++i) extent = std::max(extent, f.domain().upper()[i] - f.domain().lower()[i]);
  for (std::size_t k = 0; k < r.witnesses.size(); ++k) {
    const auto& w = r.witnesses[k];
    if (!w) continue;
    ++a.witness_count;
    a.max_support = std::max(a.max_support, w->weights.size());
    double wsum = 0.0, value = 0.0;
    Point bary{};
    bool ok = w->weights.size() <= static_cast<std::size_t>(n + 2) && !w->weights.empty();
    for (std::size_t i = 0; i < w->weights.size(); ++i) {
      ok = ok && w->weights[i] >= 0.0 && f.valid(w->samples[i]);
      wsum += w->weights[i];
      value += w->weights[i] * f[w->samples[i]];
      for (int c = 0; c < n; ++c) bary[c] += w->weights[i] * w->points[i][c];
    }
    ok = ok && std::abs(wsum - 1.0) <= 1e-9 && distance(bary, f.point(k), n) <= 1e-9 * extent &&
         std::abs(value - env[k]) <= a.tolerance;
    if (!ok) ++a.witness_failures;
  }
  return a;
}

inline json audit_to_json(const EnvelopeAudit& a) {
  return {{"minorant_excess", a.minorant_excess}, {"convexity_defect", a.convexity_defect},
          {"idempotence_gap", a.idempotence_gap}, {"witness_count", a.witness_count},
          {"witness_failures", a.witness_failures}, {"max_support", a.max_support},
          {"tolerance", a.tolerance},               {"ok", a.ok()}};
}

}  // namespace smooth_insert
