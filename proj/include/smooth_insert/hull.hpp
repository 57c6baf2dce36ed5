#pragma once

// Lower convex hull of a lifted planar point cloud (x_i, y_i, z_i), by quickhull in R^3.
//
// Planar coordinates are expected to be small integers (grid indices) so that the
// vertical component of every facet normal is computed exactly. Coplanar and
// near-coplanar points are handled with a thick-plane tolerance; callers that need a
// simplicial lower hull perturb z slightly before calling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "errors.hpp"

namespace smooth_insert::detail {

using Vec3 = std::array<double, 3>;

inline Vec3 sub3(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 cross3(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

class Quickhull {
 public:
  struct Face {
    std::array<int, 3> v{};
    /// nb[e] is the face across edge (v[e], v[(e+1)%3]).
    std::array<int, 3> nb{-1, -1, -1};
    Vec3 normal{};
    double offset = 0.0;
    std::vector<int> outside;
    int eye = -1;
    double eye_dist = 0.0;
    bool alive = true;
    std::uint32_t stamp = 0;
  };

  explicit Quickhull(const std::vector<Vec3>& pts) : pts_(pts) {
    double extent = 0.0;
    for (int c = 0; c < 3; ++c) {
      double lo = pts_[0][c], hi = pts_[0][c];
      for (const auto& p : pts_) {
        lo = std::min(lo, p[c]);
        hi = std::max(hi, p[c]);
      }
      extent = std::max(extent, hi - lo);
    }
    eps_ = 1e-12 * std::max(extent, 1e-300);
    build();
  }

  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Vec3>& points() const { return pts_; }

  /// Live faces whose outward normal points strictly downward in exact arithmetic on x, y.
  std::vector<std::array<int, 3>> lower_faces() const {
    std::vector<std::array<int, 3>> out;
    for (const auto& f : faces_) {
      if (!f.alive) continue;
      if (planar_orientation(f.v) < 0.0) out.push_back(f.v);
    }
    return out;
  }

  /// z-component of the (unnormalised) face normal: twice the signed xy-area.
  double planar_orientation(const std::array<int, 3>& v) const {
    const Vec3 &a = pts_[v[0]], &b = pts_[v[1]], &c = pts_[v[2]];
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  }

 private:
  double dist(const Face& f, int p) const { return dot3(f.normal, pts_[p]) - f.offset; }

  int make_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    const Vec3 n = cross3(sub3(pts_[b], pts_[a]), sub3(pts_[c], pts_[a]));
    const double len = std::sqrt(dot3(n, n));
    if (!(len > 0.0)) throw InvariantError("degenerate hull facet");
    f.normal = {n[0] / len, n[1] / len, n[2] / len};
    f.offset = dot3(f.normal, pts_[a]);
    faces_.push_back(std::move(f));
    return static_cast<int>(faces_.size()) - 1;
  }

  void assign(const std::vector<int>& candidates, const std::vector<int>& new_faces) {
    for (int p : candidates) {
      for (int fi : new_faces) {
        Face& f = faces_[fi];
        const double d = dist(f, p);
        if (d > eps_) {
          f.outside.push_back(p);
          if (d > f.eye_dist) {
            f.eye_dist = d;
            f.eye = p;
          }
          break;
        }
      }
    }
  }

  void build() {
    const int n = static_cast<int>(pts_.size());
    if (n < 4) throw RankError("lifted cloud needs at least 4 points");
    int i0 = 0;
    for (int i = 1; i < n; ++i)
      if (pts_[i] < pts_[i0]) i0 = i;
    int i1 = -1;
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec3 d = sub3(pts_[i], pts_[i0]);
      const double l = dot3(d, d);
      if (l > best) best = l, i1 = i;
    }
    if (i1 < 0 || std::sqrt(best) <= eps_) throw RankError("lifted cloud collapses to a point");
    int i2 = -1;
    best = 0.0;
    const Vec3 e01 = sub3(pts_[i1], pts_[i0]);
    for (int i = 0; i < n; ++i) {
      const Vec3 c = cross3(e01, sub3(pts_[i], pts_[i0]));
      const double l = std::sqrt(dot3(c, c)) / std::sqrt(dot3(e01, e01));
      if (l > best) best = l, i2 = i;
    }
    if (i2 < 0 || best <= eps_) throw RankError("lifted cloud is collinear");
    Vec3 nrm = cross3(e01, sub3(pts_[i2], pts_[i0]));
    const double nl = std::sqrt(dot3(nrm, nrm));
    int i3 = -1;
    best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double l = std::abs(dot3(nrm, sub3(pts_[i], pts_[i0]))) / nl;
      if (l > best) best = l, i3 = i;
    }
    if (i3 < 0 || best <= eps_) throw RankError("lifted cloud is coplanar");

    const std::array<std::array<int, 3>, 4> tri = {{{i0, i1, i2}, {i0, i3, i1}, {i1, i3, i2}, {i2, i3, i0}}};
    const std::array<int, 4> opposite = {i3, i2, i0, i1};
    std::vector<int> initial;
    for (int t = 0; t < 4; ++t) {
      std::array<int, 3> v = tri[t];
      const Vec3 nn = cross3(sub3(pts_[v[1]], pts_[v[0]]), sub3(pts_[v[2]], pts_[v[0]]));
      if (dot3(nn, sub3(pts_[opposite[t]], pts_[v[0]])) > 0.0) std::swap(v[1], v[2]);
      initial.push_back(make_face(v[0], v[1], v[2]));
    }
    link(initial);

    std::vector<int> rest;
    for (int i = 0; i < n; ++i)
      if (i != i0 && i != i1 && i != i2 && i != i3) rest.push_back(i);
    assign(rest, initial);

    std::vector<int> stack(initial.begin(), initial.end());
    while (!stack.empty()) {
      const int fi = stack.back();
      stack.pop_back();
      if (!faces_[fi].alive || faces_[fi].outside.empty()) continue;
      add_point(fi, stack);
    }
  }

  static std::uint64_t edge_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }

  void link(const std::vector<int>& ids) {
    std::unordered_map<std::uint64_t, int> by_edge;
    for (int fi : ids)
      for (int e = 0; e < 3; ++e) by_edge[edge_key(faces_[fi].v[e], faces_[fi].v[(e + 1) % 3])] = fi;
    for (int fi : ids)
      for (int e = 0; e < 3; ++e) {
        const auto it = by_edge.find(edge_key(faces_[fi].v[(e + 1) % 3], faces_[fi].v[e]));
        if (it == by_edge.end()) throw InvariantError("open initial hull");
        faces_[fi].nb[e] = it->second;
      }
  }

  void add_point(int start, std::vector<int>& stack) {
    const int eye = faces_[start].eye;
    ++stamp_;
    std::vector<int> visible{start};
    faces_[start].stamp = stamp_;
    for (std::size_t q = 0; q < visible.size(); ++q) {
      const Face& f = faces_[visible[q]];
      for (int e = 0; e < 3; ++e) {
        const int nb = f.nb[e];
        if (faces_[nb].stamp == stamp_) continue;
        if (dist(faces_[nb], eye) > eps_) {
          faces_[nb].stamp = stamp_;
          visible.push_back(nb);
        }
      }
    }

    struct HorizonEdge {
      int a, b, across;
    };
    std::vector<HorizonEdge> horizon;
    for (int fi : visible) {
      const Face& f = faces_[fi];
      for (int e = 0; e < 3; ++e)
        if (faces_[f.nb[e]].stamp != stamp_) horizon.push_back({f.v[e], f.v[(e + 1) % 3], f.nb[e]});
    }
    // The horizon must be one simple cycle.
    std::unordered_map<int, int> from;
    for (std::size_t h = 0; h < horizon.size(); ++h)
      if (!from.emplace(horizon[h].a, static_cast<int>(h)).second) throw InvariantError("hull horizon is not simple");
    std::vector<int> order;
    int cur = 0;
    for (std::size_t step = 0; step < horizon.size(); ++step) {
      order.push_back(cur);
      const auto it = from.find(horizon[cur].b);
      if (it == from.end()) throw InvariantError("hull horizon is open");
      cur = it->second;
    }
    if (cur != 0) throw InvariantError("hull horizon is not a single cycle");

    std::vector<int> orphans;
    for (int fi : visible) {
      Face& f = faces_[fi];
      f.alive = false;
      for (int p : f.outside)
        if (p != eye) orphans.push_back(p);
      f.outside.clear();
      f.outside.shrink_to_fit();
    }

    std::vector<int> created(horizon.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      const HorizonEdge& h = horizon[order[k]];
      created[k] = make_face(h.a, h.b, eye);
      Face& across = faces_[h.across];
      for (int e = 0; e < 3; ++e)
        if (across.v[e] == h.b && across.v[(e + 1) % 3] == h.a) across.nb[e] = created[k];
      faces_[created[k]].nb[0] = h.across;
    }
    const std::size_t m = created.size();
    for (std::size_t k = 0; k < m; ++k) {
      faces_[created[k]].nb[1] = created[(k + 1) % m];
      faces_[created[k]].nb[2] = created[(k + m - 1) % m];
    }
    assign(orphans, created);
    for (int fi : created)
      if (!faces_[fi].outside.empty()) stack.push_back(fi);
  }

  std::vector<Vec3> pts_;
  std::vector<Face> faces_;
  double eps_ = 0.0;
  std::uint32_t stamp_ = 0;
};

}  // namespace smooth_insert::detail
