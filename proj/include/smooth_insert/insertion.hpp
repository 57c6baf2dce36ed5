#pragma once

// Insertion of a C^{1,1} field between a semi-convex f and a semi-concave g:
//
//   F = f + K/2 |y|^2 + barrier,  G = g + K/2 |y|^2 + barrier,
//   h = env(G) - K/2 |y|^2 - barrier.
//
// K is chosen so that F is convex; then F <= env(G) <= G and f <= h <= g.
// The barrier is 1/(R^2 - |y - c|^2) on a ball and sum_i 1/(y_i - a_i) + 1/(b_i - y_i)
// on a box.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "envelope.hpp"
#include "field.hpp"
#include "regularity.hpp"

namespace smooth_insert {

/// Distance from y to the barrier singularity (negative outside the domain).
inline double barrier_clearance(const Domain& d, const Point& y) {
  if (d.kind() == DomainKind::ball) return d.radius() - distance(y, d.center(), d.dim());
  double c = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d.dim(); ++i) c = std::min({c, y[i] - d.lower()[i], d.upper()[i] - y[i]});
  return c;
}

inline double barrier_value(const Domain& d, const Point& y) {
  if (!(barrier_clearance(d, y) > 0.0))
    throw DomainError("sample " + format_point(y, d.dim()) + " lies on or outside the barrier singularity");
  if (d.kind() == DomainKind::ball) {
    const double r = distance(y, d.center(), d.dim());
    return 1.0 / (d.radius() * d.radius() - r * r);
  }
  double v = 0.0;
  for (int i = 0; i < d.dim(); ++i) v += 1.0 / (y[i] - d.lower()[i]) + 1.0 / (d.upper()[i] - y[i]);
  return v;
}

/// Bound on the spectral norm of the barrier Hessian over the central core used for
/// regularity estimates: the ball of radius R/2, or the middle half of each box axis.
inline double barrier_core_hessian_bound(const Domain& d) {
  if (d.kind() == DomainKind::ball) {
    const double R = d.radius(), r = 0.5 * R, u = R * R - r * r;
    return 2.0 / (u * u) + 8.0 * r * r / (u * u * u);
  }
  double b = 0.0;
  for (int i = 0; i < d.dim(); ++i) {
    const double L = d.upper()[i] - d.lower()[i], m = 0.25 * L;
    b = std::max(b, 2.0 / (m * m * m) + 2.0 / ((L - m) * (L - m) * (L - m)));
  }
  return b;
}

/// Samples of `grid` inside the regularity core of the barrier domain.
inline Mask barrier_core(const ScalarField& grid, const Domain& d) {
  Mask m(grid.size(), 0);
  for_each_valid(grid, [&](std::size_t k) {
    const Point y = grid.point(k);
    bool in;
    if (d.kind() == DomainKind::ball) {
      in = distance(y, d.center(), d.dim()) <= 0.5 * d.radius() * (1.0 + 1e-12);
    } else {
      in = true;
      for (int i = 0; i < d.dim() && in; ++i) {
        const double L = d.upper()[i] - d.lower()[i];
        in = y[i] >= d.lower()[i] + 0.25 * L * (1.0 - 1e-12) && y[i] <= d.upper()[i] - 0.25 * L * (1.0 - 1e-12);
      }
    }
    m[k] = in ? 1 : 0;
  });
  return m;
}

inline double half_square_norm(const Point& y, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += y[i] * y[i];
  return 0.5 * s;
}

/// The grid's domain grown by `cells` grid spacings (per axis for a box, max spacing for a ball).
inline Domain padded_domain(const ScalarField& grid, int cells) {
  const Domain& d = grid.domain();
  const int n = grid.dim();
  if (d.kind() == DomainKind::ball) {
    std::vector<double> c(d.center().begin(), d.center().begin() + n);
    return Domain::ball(c, d.radius() + cells * grid.max_spacing());
  }
  std::vector<double> lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    lo[i] = d.lower()[i] - cells * grid.spacing()[i];
    hi[i] = d.upper()[i] + cells * grid.spacing()[i];
  }
  return Domain::box(lo, hi);
}

/// field + K/2 |y|^2 + barrier(y) on every valid sample.
inline ScalarField modulate(const ScalarField& field, double K, const Domain& domain) {
  if (domain.dim() != field.dim()) throw InputError("barrier domain dimension does not match the field");
  return map_valid(field, [&](double v, const Point& y) {
    return v + K * half_square_norm(y, field.dim()) + barrier_value(domain, y);
  });
}

/// Inverse of modulate for the same K and domain.
inline ScalarField demodulate(const ScalarField& field, double K, const Domain& domain) {
  if (domain.dim() != field.dim()) throw InputError("barrier domain dimension does not match the field");
  return map_valid(field, [&](double v, const Point& y) {
    return v - K * half_square_norm(y, field.dim()) - barrier_value(domain, y);
  });
}

/// Samples valid in both fields where |f - g| <= tol.
inline Mask coincidence_set(const ScalarField& f, const ScalarField& g, double tol = 1e-8) {
  if (!f.same_grid(g)) throw InputError("fields live on different grids");
  Mask m(f.size(), 0);
  for (std::size_t k = 0; k < f.size(); ++k) m[k] = (f.valid(k) && g.valid(k) && std::abs(f[k] - g[k]) <= tol) ? 1 : 0;
  return m;
}

/// Standard compactly supported smooth profile, normalised to peak 1 at t = 0.
inline double bump_profile(double t) {
  if (!(t < 1.0) || t <= -1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

struct BumpPartition {
  std::vector<Point> centers;
  std::vector<double> radii;
  /// Infimum of Phi over each bump's support samples.
  std::vector<double> alphas;
  std::vector<double> coefficients;
  /// Largest number of bumps positive at one sample; coefficients are alpha / max_overlap.
  int max_overlap = 0;
  /// Lattice spacing of candidate centres and the radius cap.
  double lattice_step = 0.0;
  double max_radius = 0.0;
  std::string profile = "exp(1 - 1/(1 - t^2)), t = |y - c| / r";

  double operator()(const Point& y, int dim) const {
    double s = 0.0;
    for (std::size_t i = 0; i < centers.size(); ++i)
      s += coefficients[i] * bump_profile(distance(y, centers[i], dim) / radii[i]);
    return s;
  }
};

struct InsertionOptions {
  double tol_ins = 1e-8;
  EnvelopeOptions envelope{};
  /// Valid samples are kept at least this many cells away from the barrier singularity.
  int margin_cells = 2;
  /// K is doubled at most this many times past its initial value.
  int max_doublings = 10;
  /// Neighbourhood radius, in cells, of the reported C^{1,1} estimate.
  double c11_radius_cells = 2.0;
  /// Starting K instead of the estimate from f's semi-convexity (still verified).
  std::optional<double> initial_K;
};

struct InsertionResult {
  ScalarField h;
  double K = 0.0;
  DomainKind barrier_kind = DomainKind::ball;
  double sandwich_violation = 0.0;
  Mask coincidence_mask{};
  std::optional<RegularityEstimate> c11_estimate{};
  /// 4 (K + C_g) + barrier Hessian bound on the core.
  double c11_ceiling = 0.0;
  double semiconvexity_f = 0.0;
  double semiconcavity_g = 0.0;
  std::vector<double> K_history{};
  /// max(F - env(G)) and max(env(G) - G) before clamping, over working samples.
  double lower_gap = 0.0;
  double upper_gap = 0.0;
  std::string envelope_method{};
  /// Set by insert_strict.
  std::optional<BumpPartition> partition{};
  /// min(h - f, g - h) over samples farther than one bump radius from E (insert_strict).
  std::optional<double> strict_margin{};
  std::optional<double> partition_margin{};
};

namespace detail {

inline Mask working_mask(const ScalarField& f, const ScalarField& g, const Domain& barrier, int margin_cells) {
  const double clearance = margin_cells * f.max_spacing() * (1.0 - 1e-9);
  Mask m(f.size(), 0);
  for (std::size_t k = 0; k < f.size(); ++k)
    m[k] = (f.valid(k) && g.valid(k) && barrier_clearance(barrier, f.point(k)) >= clearance) ? 1 : 0;
  return m;
}

inline void require_sandwich(const ScalarField& f, const ScalarField& g, double tol) {
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t at = 0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (!f.valid(k) || !g.valid(k)) continue;
    if (f[k] - g[k] > worst) {
      worst = f[k] - g[k];
      at = k;
    }
  }
  if (worst > tol) {
    std::ostringstream os;
    os.precision(17);
    os << "f exceeds g by " << worst << " at " << format_point(f.point(at), f.dim()) << " (index "
       << format_index(f.index(at), f.dim()) << ")";
    throw PreconditionError(os.str());
  }
}

/// Smallest symmetric second difference over the default tested offsets.
inline std::pair<double, std::size_t> min_second_difference(const ScalarField& F) {
  const auto offsets = tested_offsets(F);
  double worst = std::numeric_limits<double>::infinity();
  std::size_t at = 0;
  for_each_valid(F, [&](std::size_t k) {
    const GridIndex g = F.index(k);
    for (const auto& v : offsets) {
      GridIndex p = g, m = g;
      for (int i = 0; i < F.dim(); ++i) {
        p[i] += v[i];
        m[i] -= v[i];
      }
      if (!F.valid(p) || !F.valid(m)) continue;
      const double sd = F[F.flat(p)] + F[F.flat(m)] - 2.0 * F[k];
      if (sd < worst) {
        worst = sd;
        at = k;
      }
    }
  });
  return {worst, at};
}

}  // namespace detail

inline InsertionResult insert_c11(const ScalarField& f, const ScalarField& g, const Domain& barrier,
                                  const InsertionOptions& opts = {}) {
  if (!f.same_grid(g)) throw InputError("f and g must share a grid");
  detail::require_sandwich(f, g, opts.tol_ins);
  const int n = f.dim();
  const Mask work = detail::working_mask(f, g, barrier, opts.margin_cells);
  if (std::count(work.begin(), work.end(), 1) < 2)
    throw PreconditionError("fewer than 2 samples lie " + std::to_string(opts.margin_cells) +
                            " cells inside the barrier domain");
  const ScalarField fw = f.with_mask(work), gw = g.with_mask(work);

  InsertionResult out{.h = fw, .barrier_kind = barrier.kind()};
  const ModulusSpec lin = ModulusSpec::linear(1.0);
  try {
    out.semiconvexity_f = estimate_semiconvexity(fw, lin).constant;
    out.semiconcavity_g = estimate_semiconcavity(gw, lin).constant;
  } catch (const EstimationError&) {
    // Too few symmetric pairs: leave the constants at 0 and rely on the verified loop.
  }

  double K = opts.initial_K ? *opts.initial_K : 2.0 * out.semiconvexity_f + fw.max_spacing();
  if (!(K > 0.0)) K = fw.max_spacing();
  bool accepted = false;
  std::string last_failure;
  std::optional<ScalarField> F;
  for (int attempt = 0; attempt <= opts.max_doublings; ++attempt, K *= 2.0) {
    out.K_history.push_back(K);
    F.emplace(modulate(fw, K, barrier));
    const double tol = opts.envelope.tol_env * value_scale(*F);
    const auto [sd, at] = detail::min_second_difference(*F);
    if (sd < -tol) {
      std::ostringstream os;
      os << "K=" << K << ": second difference " << sd << " at " << format_index(F->index(at), n);
      last_failure = os.str();
      continue;
    }
    const auto envF = lower_convex_envelope(*F, {opts.envelope.tol_env, false, opts.envelope.seed});
    double gap = 0.0;
    for_each_valid(*F, [&](std::size_t k) { gap = std::max(gap, (*F)[k] - envF.envelope[k]); });
    if (gap > tol) {
      std::ostringstream os;
      os << "K=" << K << ": modulated f sits " << gap << " above its convex envelope";
      last_failure = os.str();
      continue;
    }
    accepted = true;
    break;
  }
  if (!accepted) {
    std::ostringstream os;
    os << "no K up to " << out.K_history.back() << " made the modulated f convex; last failure: " << last_failure;
    throw ModulationError(os.str());
  }
  out.K = K;

  const ScalarField G = modulate(gw, K, barrier);
  EnvelopeOptions eo = opts.envelope;
  eo.witnesses = false;
  const EnvelopeResult envG = lower_convex_envelope(G, eo);
  out.envelope_method = envG.method;
  const double tolG = opts.envelope.tol_env * value_scale(G);
  for_each_valid(G, [&](std::size_t k) {
    out.lower_gap = std::max(out.lower_gap, (*F)[k] - envG.envelope[k]);
    out.upper_gap = std::max(out.upper_gap, envG.envelope[k] - G[k]);
  });
  if (out.lower_gap > tolG || out.upper_gap > tolG) {
    std::ostringstream os;
    os << "F <= env(G) <= G fails: lower gap " << out.lower_gap << ", upper gap " << out.upper_gap;
    throw InvariantError(os.str());
  }

  out.h = demodulate(envG.envelope, K, barrier);
  for_each_valid(out.h, [&](std::size_t k) {
    out.sandwich_violation = std::max({out.sandwich_violation, f[k] - out.h[k], out.h[k] - g[k]});
  });
  if (out.sandwich_violation > opts.tol_ins) {
    std::ostringstream os;
    os << "sandwich violated by " << out.sandwich_violation;
    throw InvariantError(os.str());
  }
  out.coincidence_mask = coincidence_set(fw, gw, opts.tol_ins);

  try {
    out.c11_estimate =
        estimate_c1omega(out.h, lin, opts.c11_radius_cells * out.h.max_spacing(), barrier_core(out.h, barrier));
  } catch (const EstimationError&) {
    out.c11_estimate.reset();
  }
  out.c11_ceiling = 4.0 * (K + out.semiconcavity_g) + barrier_core_hessian_bound(barrier);
  return out;
}

/// Bump partition phi = sum beta_i phi_i with 0 <= phi <= Phi on the working samples,
/// phi > 0 at every sample farther than `max_radius` from E.
inline BumpPartition build_bump_partition(const ScalarField& phi_cap, const Mask& E) {
  const int n = phi_cap.dim();
  const Domain& d = phi_cap.domain();
  double min_side = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) min_side = std::min(min_side, d.upper()[i] - d.lower()[i]);
  BumpPartition part;
  part.max_radius = std::max(4.0 * phi_cap.max_spacing(), 0.2 * min_side);
  part.lattice_step = 0.5 * part.max_radius;

  std::vector<Point> coincidence;
  for (std::size_t k = 0; k < E.size(); ++k)
    if (E[k]) coincidence.push_back(phi_cap.point(k));

  GridIndex count{1, 1, 1};
  for (int i = 0; i < n; ++i)
    count[i] = static_cast<int>(std::floor((d.upper()[i] - d.lower()[i]) / part.lattice_step + 1e-9)) + 1;
  GridIndex c{};
  for (c[0] = 0; c[0] < count[0]; ++c[0])
    for (c[1] = 0; c[1] < count[1]; ++c[1])
      for (c[2] = 0; c[2] < count[2]; ++c[2]) {
        Point center{};
        for (int i = 0; i < n; ++i) center[i] = d.lower()[i] + c[i] * part.lattice_step;
        double dE = std::numeric_limits<double>::infinity();
        for (const auto& e : coincidence) dE = std::min(dE, distance(center, e, n));
        const double r = std::min(part.max_radius, 0.9 * dE);
        if (!(r > phi_cap.min_spacing())) continue;
        double alpha = std::numeric_limits<double>::infinity();
        bool any = false;
        for_each_valid(phi_cap, [&](std::size_t k) {
          if (distance(phi_cap.point(k), center, n) >= r) return;
          any = true;
          alpha = std::min(alpha, phi_cap[k]);
        });
        if (!any || !(alpha > 0.0)) continue;
        part.centers.push_back(center);
        part.radii.push_back(r);
        part.alphas.push_back(alpha);
      }

  int overlap = 0;
  for_each_valid(phi_cap, [&](std::size_t k) {
    int m = 0;
    for (std::size_t i = 0; i < part.centers.size(); ++i)
      if (distance(phi_cap.point(k), part.centers[i], n) < part.radii[i]) ++m;
    overlap = std::max(overlap, m);
  });
  part.max_overlap = std::max(overlap, 1);
  for (double a : part.alphas) part.coefficients.push_back(a / part.max_overlap);
  return part;
}

/// Insertion with f < h < g away from the coincidence set E = {f = g}.
inline InsertionResult insert_strict(const ScalarField& f, const ScalarField& g, const Domain& barrier,
                                     const InsertionOptions& opts = {}) {
  if (!f.same_grid(g)) throw InputError("f and g must share a grid");
  detail::require_sandwich(f, g, opts.tol_ins);
  const int n = f.dim();
  const Mask work = detail::working_mask(f, g, barrier, opts.margin_cells);
  const ScalarField fw = f.with_mask(work), gw = g.with_mask(work);
  const Mask E = coincidence_set(fw, gw, opts.tol_ins);

  // Phi = (g - f) / 3, clipped at 0 where f exceeds g within tolerance.
  std::vector<double> cap(f.size(), 0.0);
  for_each_valid(fw, [&](std::size_t k) { cap[k] = std::max(0.0, (gw[k] - fw[k]) / 3.0); });
  const ScalarField Phi = fw.with_values(cap);
  const BumpPartition part = build_bump_partition(Phi, E);

  std::vector<double> phi(f.size(), 0.0);
  for_each_valid(fw, [&](std::size_t k) { phi[k] = std::min(part(fw.point(k), n), cap[k]); });
  const ScalarField phi_field = fw.with_values(phi);

  InsertionResult out = insert_c11(sum(fw, phi_field), difference(gw, phi_field), barrier, opts);
  // Report against the original pair.
  out.sandwich_violation = 0.0;
  for_each_valid(out.h, [&](std::size_t k) {
    out.sandwich_violation = std::max({out.sandwich_violation, f[k] - out.h[k], out.h[k] - g[k]});
  });
  out.coincidence_mask = E;
  out.partition = part;

  std::vector<Point> coincidence;
  for (std::size_t k = 0; k < E.size(); ++k)
    if (E[k]) coincidence.push_back(fw.point(k));
  double margin = std::numeric_limits<double>::infinity(), pmargin = margin;
  for_each_valid(out.h, [&](std::size_t k) {
    const Point y = fw.point(k);
    for (const auto& e : coincidence)
      if (distance(y, e, n) <= part.max_radius) return;
    margin = std::min({margin, out.h[k] - f[k], g[k] - out.h[k]});
    pmargin = std::min(pmargin, phi[k]);
  });
  if (std::isfinite(margin)) {
    out.strict_margin = margin;
    out.partition_margin = pmargin;
  }
  return out;
}

struct CoverBall {
  Point center{};
  double radius = 0.0;
};

struct GlueResult {
  ScalarField field;
  std::optional<RegularityEstimate> c11_estimate{};
  /// Largest finite-difference gradient norm of a partition weight.
  double partition_gradient_bound = 0.0;
};

/// h = sum_i w_i h_i with w_i = psi_i / sum_j psi_j, psi_i the profile bump of cover ball i.
/// Every local field must share one grid and be valid wherever its bump is positive on
/// the target samples. `target` defaults to the valid samples of the first local field's grid.
inline GlueResult glue(const std::vector<ScalarField>& locals, const std::vector<CoverBall>& cover,
                       const Mask& target = {}) {
  if (locals.empty() || locals.size() != cover.size()) throw InputError("glue needs one cover ball per local field");
  const ScalarField& base = locals.front();
  const int n = base.dim();
  if (n > 2) throw InputError("gluing is implemented for dimension 1 and 2");
  for (const auto& h : locals)
    if (h.domain() != base.domain() || h.shape() != base.shape()) throw InputError("local fields must share one grid");

  Mask region(base.size(), 0);
  for (std::size_t k = 0; k < base.size(); ++k) {
    const bool grid_valid = base.domain().admits_sample(base.point(k));
    region[k] = target.empty() ? grid_valid : (target[k] && grid_valid);
  }

  std::vector<std::vector<double>> weights(cover.size(), std::vector<double>(base.size(), 0.0));
  std::vector<double> values(base.size(), 0.0);
  for (std::size_t k = 0; k < base.size(); ++k) {
    if (!region[k]) continue;
    const Point y = base.point(k);
    double total = 0.0;
    for (std::size_t i = 0; i < cover.size(); ++i) {
      weights[i][k] = bump_profile(distance(y, cover[i].center, n) / cover[i].radius);
      total += weights[i][k];
    }
    if (!(total > 1e-300))
      throw CoverError("cover leaves sample " + format_point(y, n) + " uncovered (weights sum to 0)");
    double s = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < cover.size(); ++i) {
      weights[i][k] /= total;
      s += weights[i][k];
      if (weights[i][k] == 0.0) continue;
      if (!locals[i].valid(k))
        throw CoverError("local field " + std::to_string(i) + " is invalid at " + format_point(y, n) +
                         " where its bump is positive");
      acc += weights[i][k] * locals[i][k];
    }
    if (s < 1.0 - 1e-9) throw CoverError("partition weights sum to " + std::to_string(s) + " at " + format_point(y, n));
    values[k] = acc;
  }
  GlueResult out{.field = ScalarField(base.domain(), base.shape_vector(), std::move(values), region)};

  for (const auto& w : weights) {
    const ScalarField wf(base.domain(), base.shape_vector(), w, region);
    for_each_valid(wf, [&](std::size_t k) {
      try {
        out.partition_gradient_bound = std::max(out.partition_gradient_bound, norm(gradient_fd(wf, wf.index(k)).value, n));
      } catch (const EstimationError&) {
      }
    });
  }
  try {
    out.c11_estimate = estimate_c1omega(out.field, ModulusSpec::linear(1.0), 2.0 * out.field.max_spacing());
  } catch (const EstimationError&) {
    out.c11_estimate.reset();
  }
  return out;
}

/// Runs insert_c11 on each cover ball (barrier ball enlarged by margin_cells + 1 cells so
/// that the local field is valid on the whole bump support) and glues the results.
inline GlueResult insert_on_cover(const ScalarField& f, const ScalarField& g, const std::vector<CoverBall>& cover,
                                  const InsertionOptions& opts = {}, const Mask& target = {}) {
  std::vector<ScalarField> locals;
  const double pad = (opts.margin_cells + 1) * f.max_spacing();
  for (const auto& b : cover) {
    std::vector<double> c(b.center.begin(), b.center.begin() + f.dim());
    locals.push_back(insert_c11(f, g, Domain::ball(c, b.radius + pad), opts).h);
  }
  return glue(locals, cover, target);
}

inline json insertion_to_json(const InsertionResult& r) {
  const int n = r.h.dim();
  json j;
  j["K"] = r.K;
  j["K_history"] = r.K_history;
  j["barrier_kind"] = r.barrier_kind == DomainKind::ball ? "ball" : "box";
  j["sandwich_violation"] = r.sandwich_violation;
  std::size_t coincide = 0, total = 0;
  for (std::size_t k = 0; k < r.coincidence_mask.size(); ++k) {
    if (!r.h.valid(k)) continue;
    ++total;
    coincide += r.coincidence_mask[k] ? 1 : 0;
  }
  j["coincidence_fraction"] = total ? static_cast<double>(coincide) / total : 0.0;
  j["c11_estimate"] = r.c11_estimate ? estimate_to_json(*r.c11_estimate, ModulusSpec::linear(1.0), n) : json(nullptr);
  j["c11_ceiling"] = r.c11_ceiling;
  j["semiconvexity_f"] = r.semiconvexity_f;
  j["semiconcavity_g"] = r.semiconcavity_g;
  j["lower_gap"] = r.lower_gap;
  j["upper_gap"] = r.upper_gap;
  j["envelope_method"] = r.envelope_method;
  if (r.partition) {
    j["partition"] = {{"bumps", r.partition->centers.size()},
                      {"max_radius", r.partition->max_radius},
                      {"max_overlap", r.partition->max_overlap},
                      {"profile", r.partition->profile}};
  }
  if (r.strict_margin) j["strict_margin"] = *r.strict_margin;
  if (r.partition_margin) j["partition_margin"] = *r.partition_margin;
  return j;
}

}  // namespace smooth_insert
