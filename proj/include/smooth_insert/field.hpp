#pragma once

// Uniform vertex-centred grids over box and ball domains (dimension 1 to 3),
// with multilinear evaluation and finite-difference calculus.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace smooth_insert {

inline constexpr int kMaxDim = 3;

/// Physical coordinates; components past the field dimension are zero.
using Point = std::array<double, kMaxDim>;
/// Per-axis grid coordinates; components past the field dimension are zero.
using GridIndex = std::array<int, kMaxDim>;
/// One byte per sample, non-zero meaning "member".
using Mask = std::vector<std::uint8_t>;

/// Relative shrink of the ball radius used to realise an open ball on the grid.
inline constexpr double kEdgeEpsilon = 1e-9;

inline double norm(const Point& p, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += p[i] * p[i];
  return std::sqrt(s);
}

inline double distance(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline std::string format_point(const Point& p, int dim) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (int i = 0; i < dim; ++i) os << (i ? ", " : "") << p[i];
  os << ')';
  return os.str();
}

inline std::string format_index(const GridIndex& g, int dim) {
  std::ostringstream os;
  os << '[';
  for (int i = 0; i < dim; ++i) os << (i ? ", " : "") << g[i];
  os << ']';
  return os.str();
}

enum class DomainKind { box, ball };

class Domain {
 public:
  static Domain box(const std::vector<double>& lower, const std::vector<double>& upper) {
    if (lower.size() != upper.size() || lower.empty() || lower.size() > kMaxDim)
      throw ConstructionError("box domain needs matching corner vectors of length 1 to 3");
    Domain d;
    d.kind_ = DomainKind::box;
    d.dim_ = static_cast<int>(lower.size());
    for (int i = 0; i < d.dim_; ++i) {
      if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
        throw ConstructionError("box domain needs lower[i] < upper[i] on every axis");
      d.lower_[i] = lower[i];
      d.upper_[i] = upper[i];
      d.center_[i] = 0.5 * (lower[i] + upper[i]);
    }
    return d;
  }

  static Domain ball(const std::vector<double>& center, double radius) {
    if (center.empty() || center.size() > kMaxDim)
      throw ConstructionError("ball domain needs a centre of length 1 to 3");
    if (!(radius > 0.0) || !std::isfinite(radius))
      throw ConstructionError("ball domain needs a finite radius > 0");
    Domain d;
    d.kind_ = DomainKind::ball;
    d.dim_ = static_cast<int>(center.size());
    d.radius_ = radius;
    for (int i = 0; i < d.dim_; ++i) {
      d.center_[i] = center[i];
      d.lower_[i] = center[i] - radius;
      d.upper_[i] = center[i] + radius;
    }
    return d;
  }

  DomainKind kind() const { return kind_; }
  int dim() const { return dim_; }
  /// Lower corner of the box, or of the box inscribing the ball.
  const Point& lower() const { return lower_; }
  const Point& upper() const { return upper_; }
  const Point& center() const { return center_; }
  double radius() const { return radius_; }

  /// Closed box membership, open ball membership (with a relative slack for round-off).
  bool contains(const Point& p, double slack = 1e-12) const {
    if (kind_ == DomainKind::ball) return distance(p, center_, dim_) < radius_ * (1.0 + slack);
    for (int i = 0; i < dim_; ++i) {
      const double pad = slack * (upper_[i] - lower_[i]);
      if (p[i] < lower_[i] - pad || p[i] > upper_[i] + pad) return false;
    }
    return true;
  }

  /// Whether a grid sample at `p` is a valid sample of the domain.
  bool admits_sample(const Point& p) const {
    if (kind_ == DomainKind::box) return true;
    return distance(p, center_, dim_) < radius_ * (1.0 - kEdgeEpsilon);
  }

  friend bool operator==(const Domain& a, const Domain& b) {
    if (a.kind_ != b.kind_ || a.dim_ != b.dim_) return false;
    return a.lower_ == b.lower_ && a.upper_ == b.upper_ && a.radius_ == b.radius_;
  }

 private:
  Domain() = default;

  DomainKind kind_ = DomainKind::box;
  int dim_ = 1;
  Point lower_{};
  Point upper_{};
  Point center_{};
  double radius_ = 0.0;
};

/// Samples of a real function on a uniform grid; immutable after construction.
///
/// Values are stored row-major (the last axis varies fastest). Invalid samples
/// (ball exterior, or cleared by an explicit mask) hold NaN.
class ScalarField {
 public:
  ScalarField(Domain domain, const std::vector<int>& shape, std::vector<double> values, Mask mask = {})
      : domain_(std::move(domain)), values_(std::move(values)) {
    const int n = domain_.dim();
    if (static_cast<int>(shape.size()) != n)
      throw ConstructionError("shape length " + std::to_string(shape.size()) + " does not match dimension " +
                              std::to_string(n));
    std::size_t total = 1;
    for (int i = 0; i < kMaxDim; ++i) {
      shape_[i] = i < n ? shape[i] : 1;
      if (i < n && shape_[i] < 2) throw ConstructionError("every axis needs at least 2 samples");
      total *= static_cast<std::size_t>(shape_[i]);
      spacing_[i] = i < n ? (domain_.upper()[i] - domain_.lower()[i]) / (shape_[i] - 1) : 0.0;
    }
    if (values_.size() != total)
      throw ConstructionError("values length " + std::to_string(values_.size()) + " does not match shape product " +
                              std::to_string(total));
    if (!mask.empty() && mask.size() != total) throw ConstructionError("mask length does not match shape product");

    const bool ball = domain_.kind() == DomainKind::ball;
    if (!mask.empty() || ball) {
      mask_.assign(total, 1);
      for (std::size_t k = 0; k < total; ++k) {
        bool ok = mask.empty() || mask[k] != 0;
        if (ok && ball) ok = domain_.admits_sample(point(k));
        mask_[k] = ok ? 1 : 0;
      }
      if (std::all_of(mask_.begin(), mask_.end(), [](std::uint8_t m) { return m != 0; })) mask_.clear();
    }
    for (std::size_t k = 0; k < total; ++k) {
      if (!valid(k)) {
        values_[k] = std::numeric_limits<double>::quiet_NaN();
      } else if (!std::isfinite(values_[k])) {
        throw ConstructionError("non-finite value at valid sample " + format_index(index(k), n) + " " +
                                format_point(point(k), n));
      }
    }
  }

  int dim() const { return domain_.dim(); }
  const Domain& domain() const { return domain_; }
  const GridIndex& shape() const { return shape_; }
  std::vector<int> shape_vector() const { return {shape_.begin(), shape_.begin() + dim()}; }
  std::size_t size() const { return values_.size(); }
  const Point& spacing() const { return spacing_; }

  double max_spacing() const { return *std::max_element(spacing_.begin(), spacing_.begin() + dim()); }
  double min_spacing() const { return *std::min_element(spacing_.begin(), spacing_.begin() + dim()); }

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }

  /// Empty when every sample is valid.
  const Mask& mask() const { return mask_; }
  bool has_mask() const { return !mask_.empty(); }
  bool valid(std::size_t k) const { return mask_.empty() || mask_[k] != 0; }

  bool in_grid(const GridIndex& g) const {
    for (int i = 0; i < kMaxDim; ++i)
      if (g[i] < 0 || g[i] >= shape_[i]) return false;
    return true;
  }
  bool valid(const GridIndex& g) const { return in_grid(g) && valid(flat(g)); }

  std::size_t flat(const GridIndex& g) const {
    return (static_cast<std::size_t>(g[0]) * shape_[1] + g[1]) * shape_[2] + g[2];
  }

  GridIndex index(std::size_t k) const {
    GridIndex g{};
    g[2] = static_cast<int>(k % shape_[2]);
    k /= shape_[2];
    g[1] = static_cast<int>(k % shape_[1]);
    g[0] = static_cast<int>(k / shape_[1]);
    return g;
  }

  Point point(const GridIndex& g) const {
    // Mirrored indices get exactly mirrored coordinates about the box centre.
    Point p{};
    for (int i = 0; i < dim(); ++i) {
      const int last = shape_[i] - 1;
      const double lo = domain_.lower()[i], hi = domain_.upper()[i];
      if (2 * g[i] <= last)
        p[i] = lo + (hi - lo) * (static_cast<double>(g[i]) / last);
      else
        p[i] = hi - (hi - lo) * (static_cast<double>(last - g[i]) / last);
    }
    return p;
  }
  Point point(std::size_t k) const { return point(index(k)); }

  std::size_t valid_count() const {
    if (mask_.empty()) return values_.size();
    return static_cast<std::size_t>(std::count_if(mask_.begin(), mask_.end(), [](std::uint8_t m) { return m; }));
  }

  bool same_grid(const ScalarField& o) const { return domain_ == o.domain_ && shape_ == o.shape_; }

  /// Same grid and mask, new values.
  ScalarField with_values(std::vector<double> v) const { return ScalarField(domain_, shape_vector(), std::move(v), mask_); }

  /// Same grid, values kept, validity restricted to `m` (intersected with the domain).
  ScalarField with_mask(const Mask& m) const {
    Mask combined(size(), 1);
    for (std::size_t k = 0; k < size(); ++k) combined[k] = (valid(k) && m[k]) ? 1 : 0;
    std::vector<double> v(values_.begin(), values_.end());
    for (std::size_t k = 0; k < size(); ++k)
      if (!combined[k]) v[k] = 0.0;
    return ScalarField(domain_, shape_vector(), std::move(v), combined);
  }

 private:
  Domain domain_;
  GridIndex shape_{1, 1, 1};
  Point spacing_{};
  std::vector<double> values_;
  Mask mask_;
};

/// Samples `evaluator` at every valid vertex of the grid.
inline ScalarField sample(const Domain& domain, const std::vector<int>& shape,
                          const std::function<double(const Point&)>& evaluator, const Mask& mask = {}) {
  // Build a placeholder to get the validity pattern and the point map.
  std::size_t total = 1;
  for (int s : shape) total *= static_cast<std::size_t>(std::max(s, 0));
  ScalarField grid(domain, shape, std::vector<double>(total, 0.0), mask);
  std::vector<double> values(total, 0.0);
  for (std::size_t k = 0; k < total; ++k) {
    if (!grid.valid(k)) continue;
    const Point p = grid.point(k);
    const double v = evaluator(p);
    if (!std::isfinite(v))
      throw ConstructionError("evaluator returned a non-finite value at " + format_point(p, domain.dim()));
    values[k] = v;
  }
  return ScalarField(domain, shape, std::move(values), grid.mask());
}

/// Multilinear interpolation of the enclosing cell; exact at grid points.
inline double eval(const ScalarField& field, const Point& p) {
  const int n = field.dim();
  if (!field.domain().contains(p))
    throw DomainError("point " + format_point(p, n) + " lies outside the field domain");
  GridIndex base{};
  Point frac{};
  for (int i = 0; i < n; ++i) {
    const double t = (p[i] - field.domain().lower()[i]) / field.spacing()[i];
    int cell = static_cast<int>(std::floor(t));
    cell = std::clamp(cell, 0, field.shape()[i] - 2);
    base[i] = cell;
    frac[i] = std::clamp(t - cell, 0.0, 1.0);
  }
  double acc = 0.0;
  const int corners = 1 << n;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    GridIndex g = base;
    for (int i = 0; i < n; ++i) {
      const bool up = (c >> i) & 1;
      g[i] += up ? 1 : 0;
      w *= up ? frac[i] : 1.0 - frac[i];
    }
    if (w == 0.0) continue;
    if (!field.valid(g))
      throw DomainError("point " + format_point(p, n) + " is not surrounded by valid samples");
    acc += w * field[field.flat(g)];
  }
  return acc;
}

enum class FdScheme { central, forward, backward };

struct FdGradient {
  Point value{};
  std::array<FdScheme, kMaxDim> scheme{};
};

/// Per-axis difference quotient: central where both neighbours are valid, one-sided otherwise.
inline FdGradient gradient_fd(const ScalarField& field, const GridIndex& g) {
  const int n = field.dim();
  if (!field.valid(g)) throw RangeError("gradient requested at invalid sample " + format_index(g, n));
  FdGradient out;
  const double here = field[field.flat(g)];
  for (int i = 0; i < n; ++i) {
    GridIndex up = g, down = g;
    ++up[i];
    --down[i];
    const bool has_up = field.valid(up), has_down = field.valid(down);
    const double s = field.spacing()[i];
    if (has_up && has_down) {
      out.value[i] = (field[field.flat(up)] - field[field.flat(down)]) / (2.0 * s);
      out.scheme[i] = FdScheme::central;
    } else if (has_up) {
      out.value[i] = (field[field.flat(up)] - here) / s;
      out.scheme[i] = FdScheme::forward;
    } else if (has_down) {
      out.value[i] = (here - field[field.flat(down)]) / s;
      out.scheme[i] = FdScheme::backward;
    } else {
      throw EstimationError("isolated valid sample " + format_index(g, n) + " along axis " + std::to_string(i));
    }
  }
  return out;
}

/// f(x+v) + f(x-v) - 2 f(x) with v = offset * spacing.
inline double second_difference(const ScalarField& field, const GridIndex& g, const GridIndex& offset) {
  GridIndex plus = g, minus = g;
  for (int i = 0; i < kMaxDim; ++i) {
    plus[i] += offset[i];
    minus[i] -= offset[i];
  }
  if (!field.valid(g) || !field.valid(plus) || !field.valid(minus))
    throw RangeError("second difference at " + format_index(g, field.dim()) + " with offset " +
                     format_index(offset, field.dim()) + " leaves the valid samples");
  return field[field.flat(plus)] + field[field.flat(minus)] - 2.0 * field[field.flat(g)];
}

/// Physical length of an integer offset.
inline double offset_length(const ScalarField& field, const GridIndex& offset) {
  double s = 0.0;
  for (int i = 0; i < field.dim(); ++i) {
    const double d = offset[i] * field.spacing()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline ScalarField map_valid(const ScalarField& f, const std::function<double(double, const Point&)>& op) {
  std::vector<double> v(f.size(), 0.0);
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f.valid(k)) v[k] = op(f[k], f.point(k));
  return f.with_values(std::move(v));
}

inline ScalarField negated(const ScalarField& f) {
  return map_valid(f, [](double x, const Point&) { return -x; });
}

inline ScalarField scaled(const ScalarField& f, double lambda) {
  return map_valid(f, [lambda](double x, const Point&) { return lambda * x; });
}

/// Pointwise a + sign*b on the common valid samples.
inline ScalarField combine(const ScalarField& a, const ScalarField& b, double sign) {
  if (!a.same_grid(b)) throw InputError("fields live on different grids");
  Mask m(a.size(), 0);
  std::vector<double> v(a.size(), 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    m[k] = a.valid(k) && b.valid(k);
    if (m[k]) v[k] = a[k] + sign * b[k];
  }
  return ScalarField(a.domain(), a.shape_vector(), std::move(v), m);
}

inline ScalarField sum(const ScalarField& a, const ScalarField& b) { return combine(a, b, 1.0); }
inline ScalarField difference(const ScalarField& a, const ScalarField& b) { return combine(a, b, -1.0); }

/// (min, max) over valid samples; throws on an empty field.
inline std::pair<double, double> value_range(const ScalarField& f) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (!f.valid(k)) continue;
    lo = std::min(lo, f[k]);
    hi = std::max(hi, f[k]);
  }
  if (lo > hi) throw InputError("field has no valid samples");
  return {lo, hi};
}

/// Scale used for relative tolerances: the value range, or the magnitude for flat fields.
inline double value_scale(const ScalarField& f) {
  const auto [lo, hi] = value_range(f);
  const double range = hi - lo;
  if (range > 0.0) return range;
  return std::max(std::abs(lo), 1.0);
}

/// Calls `fn(flat)` for every valid sample, in row-major order.
template <class Fn>
void for_each_valid(const ScalarField& f, Fn&& fn) {
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f.valid(k)) fn(k);
}

}  // namespace smooth_insert
