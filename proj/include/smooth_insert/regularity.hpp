#pragma once

// Grid measurements of semi-concavity, semi-convexity and C^{1,omega} constants.
//
// Semi-concavity with modulus w is probed through symmetric second differences:
//   C_hat = max over (x, v) of [f(x+v) + f(x-v) - 2 f(x)] / (2 |v| w(|v|)), clamped at 0.
// Averaging the one-sided inequality at +v and -v eliminates the supporting linear map.
// Every estimate is a lower bound for the continuum constant.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "field.hpp"
#include "field_io.hpp"

namespace smooth_insert {

struct ModulusSpec {
  enum class Kind { linear, holder };

  Kind kind = Kind::linear;
  /// Slope k for the linear modulus, exponent alpha for the Hoelder one.
  double param = 1.0;

  static ModulusSpec linear(double k = 1.0) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw InputError("linear modulus needs a finite slope k >= 0");
    return {Kind::linear, k};
  }

  static ModulusSpec holder(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("Hoelder modulus needs an exponent in (0, 1]");
    return {Kind::holder, alpha};
  }

  /// Parses "linear:k" or "holder:a".
  static ModulusSpec parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    double value = 1.0;
    if (colon != std::string::npos) {
      try {
        value = std::stod(text.substr(colon + 1));
      } catch (const std::exception&) {
        throw InputError("bad modulus parameter in '" + text + "'");
      }
    }
    if (kind == "linear") return linear(value);
    if (kind == "holder") return holder(value);
    throw InputError("unknown modulus '" + text + "' (expected linear:k or holder:a)");
  }

  double operator()(double t) const { return kind == Kind::linear ? param * t : std::pow(t, param); }

  std::string to_string() const {
    return std::string(kind == Kind::linear ? "linear:" : "holder:") + format_double(param);
  }
};

struct ModulusCheck {
  std::size_t samples = 0;
  std::size_t monotonicity_violations = 0;
  std::size_t concavity_violations = 0;
  std::size_t scaling_violations = 0;
  bool zero_at_origin = true;

  bool ok() const {
    return zero_at_origin && monotonicity_violations == 0 && concavity_violations == 0 && scaling_violations == 0;
  }
};

/// Samples w on [0, t_max] and checks w(0) = 0, monotonicity, midpoint concavity
/// and the scaling bound w(lambda t) <= max(1, lambda) w(t).
inline ModulusCheck check_modulus(const ModulusSpec& w, double t_max = 10.0, int steps = 200) {
  ModulusCheck out;
  const double tol = 1e-12;
  out.zero_at_origin = w(0.0) == 0.0;
  for (int i = 0; i < steps; ++i) {
    const double a = t_max * i / steps, b = t_max * (i + 1) / steps;
    ++out.samples;
    if (w(b) < w(a) - tol) ++out.monotonicity_violations;
    if (w(0.5 * (a + b)) < 0.5 * (w(a) + w(b)) - tol) ++out.concavity_violations;
    for (double lambda : {0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0}) {
      const double lhs = w(lambda * b), rhs = std::max(1.0, lambda) * w(b);
      if (lhs > rhs + tol * std::max(1.0, std::abs(rhs))) ++out.scaling_violations;
    }
  }
  return out;
}

inline json modulus_to_json(const ModulusSpec& w) {
  return {{"kind", w.kind == ModulusSpec::Kind::linear ? "linear" : "holder"}, {"param", w.param}};
}

struct RegularityEstimate {
  double constant = 0.0;
  GridIndex worst_point{};
  GridIndex worst_offset{};
  std::size_t sample_count = 0;
};

inline json estimate_to_json(const RegularityEstimate& e, const ModulusSpec& w, int dim) {
  return {{"constant", e.constant},
          {"worst_point", index_to_json(e.worst_point, dim)},
          {"worst_offset", index_to_json(e.worst_offset, dim)},
          {"sample_count", e.sample_count},
          {"modulus", modulus_to_json(w)}};
}

struct OffsetOptions {
  /// Largest multiple of each axis/diagonal direction tested.
  int radius = 3;
  /// Test every integer offset that fits in the grid (quadratic cost).
  bool all_offsets = false;
};

/// Canonical offsets (first non-zero component positive): by default the axis and
/// diagonal directions times 1..radius.
inline std::vector<GridIndex> tested_offsets(const ScalarField& field, const OffsetOptions& opts = {}) {
  const int n = field.dim();
  std::vector<GridIndex> out;
  auto canonical = [n](const GridIndex& v) {
    for (int i = 0; i < n; ++i)
      if (v[i] != 0) return v[i] > 0;
    return false;
  };
  if (opts.all_offsets) {
    GridIndex lo{}, hi{};
    for (int i = 0; i < n; ++i) {
      lo[i] = -(field.shape()[i] - 1) / 2;
      hi[i] = (field.shape()[i] - 1) / 2;
    }
    GridIndex v{};
    for (v[0] = lo[0]; v[0] <= hi[0]; ++v[0])
      for (v[1] = lo[1]; v[1] <= hi[1]; ++v[1])
        for (v[2] = lo[2]; v[2] <= hi[2]; ++v[2])
          if (canonical(v)) out.push_back(v);
    return out;
  }
  GridIndex d{};
  std::vector<GridIndex> directions;
  for (d[0] = -1; d[0] <= 1; ++d[0])
    for (d[1] = (n > 1 ? -1 : 0); d[1] <= (n > 1 ? 1 : 0); ++d[1])
      for (d[2] = (n > 2 ? -1 : 0); d[2] <= (n > 2 ? 1 : 0); ++d[2])
        if (canonical(d)) directions.push_back(d);
  for (int m = 1; m <= opts.radius; ++m)
    for (const auto& dir : directions) {
      GridIndex v{};
      for (int i = 0; i < n; ++i) v[i] = m * dir[i];
      out.push_back(v);
    }
  return out;
}

inline RegularityEstimate estimate_semiconcavity(const ScalarField& field, const ModulusSpec& w,
                                                 const OffsetOptions& opts = {}) {
  const int n = field.dim();
  const auto offsets = tested_offsets(field, opts);
  std::vector<double> denom(offsets.size());
  for (std::size_t o = 0; o < offsets.size(); ++o) {
    const double len = offset_length(field, offsets[o]);
    denom[o] = 2.0 * len * w(len);
    if (!(denom[o] > 0.0)) throw EstimationError("modulus " + w.to_string() + " vanishes on a tested offset");
  }
  RegularityEstimate best;
  double best_q = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < field.size(); ++k) {
    if (!field.valid(k)) continue;
    const GridIndex g = field.index(k);
    const double fx = field[k];
    for (std::size_t o = 0; o < offsets.size(); ++o) {
      GridIndex plus = g, minus = g;
      for (int i = 0; i < n; ++i) {
        plus[i] += offsets[o][i];
        minus[i] -= offsets[o][i];
      }
      if (!field.valid(plus) || !field.valid(minus)) continue;
      const double sd = field[field.flat(plus)] + field[field.flat(minus)] - 2.0 * fx;
      const double q = sd / denom[o];
      ++best.sample_count;
      if (q > best_q) {
        best_q = q;
        best.worst_point = g;
        best.worst_offset = offsets[o];
      }
    }
  }
  if (best.sample_count == 0) throw EstimationError("no valid symmetric sample pair to test");
  best.constant = std::max(0.0, best_q);
  return best;
}

inline RegularityEstimate estimate_semiconvexity(const ScalarField& field, const ModulusSpec& w,
                                                 const OffsetOptions& opts = {}) {
  return estimate_semiconcavity(negated(field), w, opts);
}

/// Valid samples whose axis neighbours are all valid, so that central differences apply.
inline Mask central_core(const ScalarField& field) {
  Mask core(field.size(), 0);
  for_each_valid(field, [&](std::size_t k) {
    const GridIndex g = field.index(k);
    bool ok = true;
    for (int i = 0; i < field.dim() && ok; ++i) {
      GridIndex up = g, down = g;
      ++up[i];
      --down[i];
      ok = field.valid(up) && field.valid(down);
    }
    core[k] = ok ? 1 : 0;
  });
  return core;
}

/// K_hat = max over core pairs (y, z) with 0 < |y - z| <= radius of
/// |grad f(y) - grad f(z)| / w(|y - z|), using central-difference gradients.
/// Discretisation-biased: O(h^2) gradient error on C^2 regions, O(h) near kinks.
inline RegularityEstimate estimate_c1omega(const ScalarField& field, const ModulusSpec& w, double neighborhood_radius,
                                           const Mask& restrict_to = {}) {
  const int n = field.dim();
  Mask core = central_core(field);
  if (!restrict_to.empty())
    for (std::size_t k = 0; k < core.size(); ++k) core[k] = core[k] && restrict_to[k];
  std::vector<Point> grad(field.size());
  bool any = false;
  for (std::size_t k = 0; k < field.size(); ++k) {
    if (!core[k]) continue;
    grad[k] = gradient_fd(field, field.index(k)).value;
    any = true;
  }
  if (!any) throw EstimationError("interior core admitting central differences is empty");

  std::vector<GridIndex> offsets;
  std::vector<double> lengths;
  GridIndex reach{};
  for (int i = 0; i < n; ++i) reach[i] = static_cast<int>(std::floor(neighborhood_radius / field.spacing()[i] + 1e-9));
  GridIndex v{};
  for (v[0] = -reach[0]; v[0] <= reach[0]; ++v[0])
    for (v[1] = -reach[1]; v[1] <= reach[1]; ++v[1])
      for (v[2] = -reach[2]; v[2] <= reach[2]; ++v[2]) {
        bool canonical = false;
        for (int i = 0; i < n; ++i)
          if (v[i] != 0) {
            canonical = v[i] > 0;
            break;
          }
        if (!canonical) continue;
        const double len = offset_length(field, v);
        if (len > neighborhood_radius * (1.0 + 1e-12)) continue;
        if (!(w(len) > 0.0)) throw EstimationError("modulus " + w.to_string() + " vanishes on a tested offset");
        offsets.push_back(v);
        lengths.push_back(len);
      }
  if (offsets.empty()) throw EstimationError("neighbourhood radius is smaller than the grid spacing");

  RegularityEstimate best;
  double best_q = -1.0;
  for (std::size_t k = 0; k < field.size(); ++k) {
    if (!core[k]) continue;
    const GridIndex g = field.index(k);
    for (std::size_t o = 0; o < offsets.size(); ++o) {
      GridIndex z = g;
      for (int i = 0; i < n; ++i) z[i] += offsets[o][i];
      if (!field.in_grid(z)) continue;
      const std::size_t kz = field.flat(z);
      if (!core[kz]) continue;
      double d2 = 0.0;
      for (int i = 0; i < n; ++i) d2 += (grad[k][i] - grad[kz][i]) * (grad[k][i] - grad[kz][i]);
      const double q = std::sqrt(d2) / w(lengths[o]);
      ++best.sample_count;
      if (q > best_q) {
        best_q = q;
        best.worst_point = g;
        best.worst_offset = offsets[o];
      }
    }
  }
  if (best.sample_count == 0) throw EstimationError("no pair of core samples within the neighbourhood radius");
  best.constant = best_q;
  return best;
}

}  // namespace smooth_insert
