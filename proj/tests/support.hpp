#pragma once

// Generators and brute-force oracles shared by the unit and acceptance tests.
// Oracles here never call into the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "smooth_insert/smooth_insert.hpp"

namespace si_test {

namespace si = smooth_insert;
using si::GridIndex;
using si::Point;
using si::ScalarField;

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
inline int uniform_int(Rng& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

inline si::Domain unit_box(int n) {
  return si::Domain::box(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0));
}

/// Smooth random function: a random quadratic plus a few low-frequency cosines.
struct SmoothFn {
  int dim = 1;
  Point lin{};
  double quad[3][3] = {};
  std::vector<Point> freqs;
  std::vector<double> amps, phases;

  double operator()(const Point& y) const {
    double v = 0.0;
    for (int i = 0; i < dim; ++i) {
      v += lin[i] * y[i];
      for (int j = 0; j < dim; ++j) v += 0.5 * quad[i][j] * y[i] * y[j];
    }
    for (std::size_t m = 0; m < freqs.size(); ++m) {
      double arg = phases[m];
      for (int i = 0; i < dim; ++i) arg += freqs[m][i] * y[i];
      v += amps[m] * std::cos(arg);
    }
    return v;
  }
};

inline SmoothFn random_smooth(Rng& rng, int dim, double amplitude = 1.0) {
  SmoothFn f;
  f.dim = dim;
  for (int i = 0; i < dim; ++i) {
    f.lin[i] = uniform(rng, -1.0, 1.0);
    for (int j = 0; j <= i; ++j) f.quad[i][j] = f.quad[j][i] = uniform(rng, -1.0, 1.0);
  }
  const int terms = uniform_int(rng, 1, 3);
  for (int m = 0; m < terms; ++m) {
    Point w{};
    for (int i = 0; i < dim; ++i) w[i] = uniform(rng, -4.0, 4.0);
    f.freqs.push_back(w);
    f.amps.push_back(amplitude * uniform(rng, 0.1, 0.6));
    f.phases.push_back(uniform(rng, 0.0, 6.283185307179586));
  }
  return f;
}

enum class FieldKind { noise, smooth, mixed, integer };

/// Random values on a grid: white noise, smooth, smooth plus noise, or small integers
/// (the last produces many ties and coplanar lifted points).
inline ScalarField random_field(Rng& rng, const si::Domain& d, const std::vector<int>& shape, FieldKind kind) {
  const SmoothFn smooth = random_smooth(rng, d.dim(), 2.0);
  const double noise = kind == FieldKind::mixed ? 0.05 : 1.0;
  return si::sample(d, shape, [&](const Point& y) {
    switch (kind) {
      case FieldKind::noise:
        return uniform(rng, -1.0, 1.0);
      case FieldKind::smooth:
        return smooth(y);
      case FieldKind::mixed:
        return smooth(y) + noise * uniform(rng, -1.0, 1.0);
      case FieldKind::integer:
        return static_cast<double>(uniform_int(rng, 0, 3));
    }
    return 0.0;
  });
}

/// Lower convex envelope of 1D samples by brute force: the least chord value over
/// all pairs of valid samples that bracket the query.
inline std::vector<double> brute_envelope_1d(const ScalarField& f) {
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f.valid(k)) ids.push_back(k);
  std::vector<double> env(f.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t q : ids) {
    const double yq = f.point(q)[0];
    double best = f[q];
    for (std::size_t i : ids) {
      if (i >= q) break;
      for (std::size_t j : ids) {
        if (j <= q) continue;
        const double yi = f.point(i)[0], yj = f.point(j)[0];
        const double t = (yq - yi) / (yj - yi);
        best = std::min(best, (1.0 - t) * f[i] + t * f[j]);
      }
    }
    env[q] = best;
  }
  return env;
}

/// Lower convex envelope of 2D samples by brute force over every triangle (and every
/// segment, for queries on an edge) of valid samples containing the query.
inline std::vector<double> brute_envelope_2d(const ScalarField& f) {
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f.valid(k)) ids.push_back(k);
  std::vector<Point> p;
  for (std::size_t k : ids) p.push_back(f.point(k));
  const std::size_t m = ids.size();
  std::vector<double> env(f.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t q = 0; q < m; ++q) {
    const Point& x = p[q];
    double best = f[ids[q]];
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) {
        const double ux = p[b][0] - p[a][0], uy = p[b][1] - p[a][1];
        const double wx = x[0] - p[a][0], wy = x[1] - p[a][1];
        const double cr = ux * wy - uy * wx;
        const double len2 = ux * ux + uy * uy;
        if (std::abs(cr) <= 1e-12 * len2) {
          const double t = (ux * wx + uy * wy) / len2;
          if (t >= -1e-12 && t <= 1.0 + 1e-12) best = std::min(best, (1.0 - t) * f[ids[a]] + t * f[ids[b]]);
        }
        for (std::size_t c = b + 1; c < m; ++c) {
          const double vx = p[c][0] - p[a][0], vy = p[c][1] - p[a][1];
          const double det = ux * vy - uy * vx;
          if (std::abs(det) <= 1e-14) continue;
          const double l1 = (wx * vy - wy * vx) / det, l2 = (ux * wy - uy * wx) / det, l0 = 1.0 - l1 - l2;
          if (l0 < -1e-12 || l1 < -1e-12 || l2 < -1e-12) continue;
          best = std::min(best, l0 * f[ids[a]] + l1 * f[ids[b]] + l2 * f[ids[c]]);
        }
      }
    env[ids[q]] = best;
  }
  return env;
}

/// Euclidean distance from every valid sample to the nearest marked sample, by brute force.
inline std::vector<double> brute_distance(const ScalarField& grid, const si::Mask& source) {
  const int n = grid.dim();
  std::vector<Point> src;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (source[k]) src.push_back(grid.point(k));
  std::vector<double> d(grid.size(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!grid.valid(k)) continue;
    for (const Point& s : src) d[k] = std::min(d[k], si::distance(grid.point(k), s, n));
  }
  return d;
}

/// Shortest paths over the king-move graph of valid samples by repeated relaxation.
inline std::vector<double> bellman_ford_distance(const ScalarField& grid, const si::Mask& source) {
  const int n = grid.dim();
  std::vector<double> d(grid.size(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (source[k]) d[k] = 0.0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (!grid.valid(k) || !std::isfinite(d[k])) continue;
      const GridIndex g = grid.index(k);
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = (n > 1 ? -1 : 0); dy <= (n > 1 ? 1 : 0); ++dy)
          for (int dz = (n > 2 ? -1 : 0); dz <= (n > 2 ? 1 : 0); ++dz) {
            GridIndex t = g;
            t[0] += dx;
            t[1] += dy;
            t[2] += dz;
            if (t == g || !grid.valid(t)) continue;
            const double step = std::sqrt(dx * dx * grid.spacing()[0] * grid.spacing()[0] +
                                          dy * dy * grid.spacing()[1] * grid.spacing()[1] +
                                          dz * dz * grid.spacing()[2] * grid.spacing()[2]);
            const std::size_t kt = grid.flat(t);
            if (d[k] + step < d[kt] - 1e-15) {
              d[kt] = d[k] + step;
              changed = true;
            }
          }
    }
  }
  return d;
}

/// Random closed set of samples: a union of a few balls and boxes, plus isolated points.
inline si::Mask random_blobs(Rng& rng, const ScalarField& grid, int blobs, double max_size) {
  const int n = grid.dim();
  si::Mask m(grid.size(), 0);
  for (int b = 0; b < blobs; ++b) {
    Point c{};
    for (int i = 0; i < n; ++i) c[i] = uniform(rng, grid.domain().lower()[i], grid.domain().upper()[i]);
    const double r = uniform(rng, 0.0, max_size);
    const bool round = uniform_int(rng, 0, 1) == 1;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (!grid.valid(k)) continue;
      const Point y = grid.point(k);
      bool in = true;
      if (round) {
        in = si::distance(y, c, n) <= r;
      } else {
        for (int i = 0; i < n; ++i) in = in && std::abs(y[i] - c[i]) <= r;
      }
      if (in) m[k] = 1;
    }
  }
  if (std::none_of(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; })) {
    std::size_t k;
    do {
      k = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(grid.size()) - 1));
    } while (!grid.valid(k));
    m[k] = 1;
  }
  return m;
}

inline ScalarField zero_grid(const si::Domain& d, const std::vector<int>& shape) {
  return si::sample(d, shape, [](const Point&) { return 0.0; });
}

}  // namespace si_test
