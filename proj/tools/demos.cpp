#include <cmath>
#include <random>
#include <sstream>

#include "cli_common.hpp"

namespace si_cli {

namespace {

using si::Point;
using si::ScalarField;

std::vector<int> grid_or(const RunConfig& cfg, std::vector<int> fallback) {
  if (cfg.grid.empty()) return fallback;
  auto g = parse_grid(cfg.grid);
  if (g.size() != fallback.size())
    throw si::InputError("--grid for this demo needs " + std::to_string(fallback.size()) + " sizes");
  return g;
}

std::vector<int> refined(const std::vector<int>& shape, int factor) {
  std::vector<int> out;
  for (int s : shape) out.push_back((s - 1) * factor + 1);
  return out;
}

json demo_header(const RunConfig& cfg) {
  return {{"command", "demo"}, {"demo", cfg.demo}, {"config", cfg.to_json()}};
}

void finish(Outputs& out, const json& report, const std::string& summary) {
  out.write_json(report["demo"].get<std::string>() + "_report.json", report);
  out.write("summary.txt", summary);
  out.write_checksums();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

int demo_counterexample(const RunConfig& cfg) {
  const auto base = grid_or(cfg, {21, 21});
  const si::Domain D = si::Domain::box({0.0, 0.0}, {1.0, 1.0});
  auto f_of = [](const Point& y) { return 1.0 - std::abs(y[0] - y[1]); };
  Outputs out(cfg.out_dir);
  json levels = json::array();
  std::string summary = "Concave tent 1 - |x - y| on [0,1]^2 (not coercive).\n"
                        "Its envelope is |x + y - 1|, with a kink along x + y = 1.\n\n"
                        "grid      c1omega   growth   jump      normal            offset\n";
  double prev = 0.0;
  for (int factor : {1, 2, 4}) {
    const auto shape = refined(base, factor);
    const ScalarField f = si::sample(D, shape, f_of);
    const si::EnvelopeResult env = si::lower_convex_envelope(f, {cfg.tol_env, false, cfg.seed});
    double err = 0.0;
    si::for_each_valid(f, [&](std::size_t k) {
      const Point y = f.point(k);
      err = std::max(err, std::abs(env.envelope[k] - std::abs(y[0] + y[1] - 1.0)));
    });
    const auto est = si::estimate_c1omega(env.envelope, si::ModulusSpec::linear(1.0), 2.0 * f.max_spacing());
    const si::SingularLine line = si::measure_singular_line(env.envelope);
    const si::CoercivityReport coer = si::check_coercive(f);
    const double growth = prev > 0.0 ? est.constant / prev : 0.0;
    levels.push_back({{"shape", shape},
                      {"analytic_error", err},
                      {"c1omega_estimate", est.constant},
                      {"growth", prev > 0.0 ? json(growth) : json(nullptr)},
                      {"gradient_jump", line.gradient_jump},
                      {"line_normal", si::point_to_json(line.normal, 2)},
                      {"line_offset", line.offset},
                      {"facet_count", env.facets.size()},
                      {"coercive", coer.coercive}});
    summary += fmt(shape[0], 4) + "x" + fmt(shape[1], 4) + "  " + fmt(est.constant) + "  " +
               (prev > 0.0 ? fmt(growth, 4) : std::string("-")) + "  " + fmt(line.gradient_jump) + "  (" +
               fmt(line.normal[0], 4) + ", " + fmt(line.normal[1], 4) + ")  " + fmt(line.offset, 4) + "\n";
    prev = est.constant;
    if (factor == 1) {
      out.write_json("counterexample_envelope.json", si::envelope_to_json(env));
      out.write_json("counterexample_coercivity.json", si::coercivity_to_json(coer));
      if (cfg.emit_plot_data) out.write("counterexample_plot.csv", fields_to_csv({"f", "envelope"}, {&f, &env.envelope}));
    }
  }
  summary += "\nExpected jump across the kink: 2*sqrt(2) = " + fmt(2.0 * std::sqrt(2.0)) + "\n";
  json rep = demo_header(cfg);
  rep["levels"] = levels;
  rep["expected_jump"] = 2.0 * std::sqrt(2.0);
  rep["coercive"] = false;
  finish(out, rep, summary);
  return kOk;
}

int demo_double_well(const RunConfig& cfg) {
  const auto shape = grid_or(cfg, {2001});
  const si::Domain D = si::Domain::box({-2.0}, {2.0});
  const ScalarField f = si::sample(D, shape, [](const Point& y) { return std::pow(y[0], 4) - y[0] * y[0]; });
  const si::EnvelopeResult env = si::lower_convex_envelope(f, {cfg.tol_env, true, cfg.seed});
  const double c = 1.0 / std::sqrt(2.0);
  double err = 0.0, lo = 0.0, hi = 0.0;
  bool seen = false;
  si::for_each_valid(f, [&](std::size_t k) {
    const double y = f.point(k)[0];
    const double exact = std::abs(y) < c ? -0.25 : f[k];
    err = std::max(err, std::abs(env.envelope[k] - exact));
    if (!env.contact_mask[k]) {
      if (!seen) lo = y;
      hi = y;
      seen = true;
    }
  });
  Outputs out(cfg.out_dir);
  out.write_json("double_well_envelope.json", si::envelope_to_json(env));
  if (cfg.emit_plot_data) out.write("double_well_plot.csv", fields_to_csv({"f", "envelope"}, {&f, &env.envelope}));
  json rep = demo_header(cfg);
  rep["samples"] = shape[0];
  rep["sup_error"] = err;
  // The flat part of the sampled envelope sits at the lowest sample, not at -1/4.
  double fmin = f[0];
  si::for_each_valid(f, [&](std::size_t k) { fmin = std::min(fmin, f[k]); });
  rep["sampling_floor"] = fmin + 0.25;
  rep["non_contact_interval"] = {lo, hi};
  rep["expected_interval"] = {-c, c};
  rep["invariants"] = si::audit_to_json(si::audit_envelope(f, env, {cfg.tol_env, true, cfg.seed}));
  const std::string summary = "Double well y^4 - y^2 on [-2, 2], " + std::to_string(shape[0]) +
                              " samples.\nSup error against the analytic envelope: " + fmt(err) +
                              "\nLowest sample above -1/4: " + fmt(fmin + 0.25) + "\nEnvelope leaves the function on [" + fmt(lo) + ", " + fmt(hi) +
                              "], expected (-1/sqrt 2, 1/sqrt 2) = (" + fmt(-c) + ", " + fmt(c) + ")\n";
  finish(out, rep, summary);
  return kOk;
}

int demo_eikonal(const RunConfig& cfg) {
  const auto shape = grid_or(cfg, {101, 101});
  const si::Domain D = si::Domain::box({-1.0, -1.0}, {1.0, 1.0});
  const ScalarField grid = si::sample(D, shape, [](const Point&) { return 0.0; });
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick_i(0, shape[0] - 1), pick_j(0, shape[1] - 1);
  si::Mask bits(grid.size(), 0);
  for (int p = 0; p < 5; ++p) bits[grid.flat({pick_i(rng), pick_j(rng), 0})] = 1;
  const si::ClosedMask A(grid, bits);
  const si::MetricKind metric = si::parse_metric(cfg.metric);
  const si::DistanceField d = si::distance_field(A, metric);
  std::vector<double> mags;
  si::for_each_valid(d.field, [&](std::size_t k) {
    if (d.field[k] < 2.0 * grid.max_spacing()) return;
    mags.push_back(si::norm(si::gradient_fd(d.field, d.field.index(k)).value, 2));
  });
  std::size_t near = 0;
  for (double m : mags) near += std::abs(m - 1.0) <= 0.05 ? 1 : 0;
  const auto hist = si::gradient_histogram(mags);
  const double frac = mags.empty() ? 0.0 : static_cast<double>(near) / mags.size();

  Outputs out(cfg.out_dir);
  out.write_json("eikonal_sources.json", si::closed_mask_to_json(A));
  out.write_json("eikonal_distance.json", si::field_to_json(d.field));
  if (cfg.emit_plot_data) out.write("eikonal_plot.csv", fields_to_csv({"d"}, {&d.field}));
  json rep = demo_header(cfg);
  rep["metric"] = si::metric_name(metric);
  rep["samples"] = mags.size();
  rep["histogram"] = hist;
  rep["histogram_bins"] = "20 bins of width 0.1 on [0, 2), then overflow";
  rep["fraction_within_5pct"] = frac;
  std::string summary = "Distance to 5 random points on [-1,1]^2 (" + si::metric_name(metric) +
                        "), samples at least 2 cells from the sources.\n"
                        "Gradient magnitude histogram (bin lower edge: count):\n";
  for (std::size_t b = 0; b < hist.size(); ++b)
    summary += "  " + (b + 1 < hist.size() ? fmt(0.1 * b, 2) : std::string(">=2")) + ": " + std::to_string(hist[b]) + "\n";
  summary += "Fraction with |grad| within 5% of 1: " + fmt(frac) + "\n";
  finish(out, rep, summary);
  return kOk;
}

int demo_holder(const RunConfig& cfg) {
  si::ModulusSpec w = si::ModulusSpec::holder(0.5);
  if (cfg.modulus.rfind("holder", 0) == 0) w = si::ModulusSpec::parse(cfg.modulus);
  const double alpha = w.param;
  const auto base = grid_or(cfg, {101});
  const si::Domain D = si::Domain::box({-1.0}, {1.0});
  // f is semi-convex and g semi-concave for the Hoelder modulus only; they touch at 0.3.
  auto smooth = [](const Point& y) { return 0.5 * std::sin(2.0 * y[0]); };
  auto f_of = [&](const Point& y) { return smooth(y) - std::pow(std::abs(y[0] - 0.3), 1.0 + alpha); };
  auto g_of = [&](const Point& y) { return smooth(y) + std::pow(std::abs(y[0] - 0.3), 1.0 + alpha); };
  si::InsertionOptions opts;
  opts.tol_ins = cfg.tol_ins;
  opts.envelope = {cfg.tol_env, false, cfg.seed};

  Outputs out(cfg.out_dir);
  json levels = json::array();
  std::string summary = "EXPLORATORY: no pass/fail criterion.\n"
                        "Insertion between f = s - |y - 0.3|^(1+a) and g = s + |y - 0.3|^(1+a), s = sin(2y)/2, a = " +
                        fmt(alpha) + ".\n\nsamples   K          C1,a(h)    C1,1(h)\n";
  for (int factor : {1, 2, 4}) {
    const auto shape = refined(base, factor);
    const ScalarField f = si::sample(D, shape, f_of), g = si::sample(D, shape, g_of);
    const si::Domain barrier = si::padded_domain(f, 3);
    const si::InsertionResult r = si::insert_c11(f, g, barrier, opts);
    const si::Mask core = si::barrier_core(r.h, barrier);
    const double radius = 2.0 * f.max_spacing();
    const auto holder_est = si::estimate_c1omega(r.h, w, radius, core);
    const auto lin_est = si::estimate_c1omega(r.h, si::ModulusSpec::linear(1.0), radius, core);
    levels.push_back({{"samples", shape[0]},
                      {"K", r.K},
                      {"sandwich_violation", r.sandwich_violation},
                      {"c1omega_holder", holder_est.constant},
                      {"c1omega_linear", lin_est.constant}});
    summary += fmt(shape[0], 6) + "     " + fmt(r.K) + "    " + fmt(holder_est.constant) + "    " +
               fmt(lin_est.constant) + "\n";
    if (factor == 1 && cfg.emit_plot_data) out.write("holder_plot.csv", fields_to_csv({"h", "f", "g"}, {&r.h, &f, &g}));
  }
  json rep = demo_header(cfg);
  rep["label"] = "exploratory";
  rep["verdict"] = nullptr;
  rep["modulus"] = si::modulus_to_json(w);
  rep["levels"] = levels;
  finish(out, rep, summary);
  return kOk;
}

int demo_separation(const RunConfig& cfg) {
  const auto shape = grid_or(cfg, {81, 81});
  const si::Domain D = si::Domain::box({-2.0, -2.0}, {2.0, 2.0});
  const ScalarField grid = si::sample(D, shape, [](const Point&) { return 0.0; });
  const double eps = 1e-9;
  const auto A = si::ClosedMask::from_predicate(grid, [&](const Point& y) { return std::hypot(y[0] + 0.7, y[1]) <= 0.2 + eps; });
  const auto B = si::ClosedMask::from_predicate(grid, [&](const Point& y) { return std::hypot(y[0] - 0.7, y[1]) <= 0.2 + eps; });
  si::SeparationOptions opts;
  opts.metric = si::parse_metric(cfg.metric);
  opts.insertion.tol_ins = cfg.tol_ins;
  opts.insertion.envelope = {cfg.tol_env, false, cfg.seed};
  const si::SeparationResult r = si::midline_separate(A, B, opts);
  Outputs out(cfg.out_dir);
  out.write_json("separation_sigma.json", si::closed_mask_to_json(si::ClosedMask(grid, r.sigma)));
  out.write("separation_boundary.csv", si::boundary_to_csv(r));
  if (cfg.emit_plot_data) out.write_json("separation_h.json", si::field_to_json(r.h_field));
  json rep = demo_header(cfg);
  rep["separation"] = si::separation_to_json(r);
  const std::string summary = "Two disks of radius 0.2 at (-0.7, 0) and (0.7, 0); d(A,B) = " + fmt(r.a) +
                              ".\nGap to A " + fmt(r.gap_to_A) + ", gap to B " + fmt(r.gap_to_B.value_or(0.0)) +
                              ", level " + fmt(r.rho) + ", min |grad h| on the band " + fmt(r.level.min_gradient) +
                              ".\nEquidistant samples " + std::to_string(r.equidistant_samples) + ", off the boundary " +
                              std::to_string(r.midline_violations) + ".\n";
  finish(out, rep, summary);
  return kOk;
}

int demo_insertion(const RunConfig& cfg) {
  const auto shape = grid_or(cfg, {41, 41});
  const si::Domain D = si::Domain::ball({0.0, 0.0}, 1.0);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::array<double, 6> c{};
  for (auto& v : c) v = U(rng);
  auto base_of = [&](const Point& y) {
    return c[0] * std::sin(2.0 * y[0] + c[1]) + c[2] * std::cos(2.0 * y[1] + c[3]) + 0.5 * c[4] * y[0] * y[1];
  };
  auto gap_of = [&](const Point& y) { return 0.25 * ((y[0] - 0.3 * c[5]) * (y[0] - 0.3 * c[5]) + y[1] * y[1]); };
  const ScalarField f = si::sample(D, shape, base_of);
  const ScalarField g = si::sample(D, shape, [&](const Point& y) { return base_of(y) + gap_of(y); });
  si::InsertionOptions opts;
  opts.tol_ins = cfg.tol_ins;
  opts.envelope = {cfg.tol_env, false, cfg.seed};
  const si::InsertionResult r = si::insert_strict(f, g, D, opts);
  Outputs out(cfg.out_dir);
  out.write_json("insertion_h.json", si::field_to_json(r.h));
  if (cfg.emit_plot_data) out.write("insertion_plot.csv", fields_to_csv({"h", "f", "g"}, {&r.h, &f, &g}));
  json rep = demo_header(cfg);
  rep["insertion"] = si::insertion_to_json(r);
  const std::string summary =
      "Strict insertion on the unit disk between a seeded random f and g = f + quadratic gap.\nK = " + fmt(r.K) +
      ", sandwich violation " + fmt(r.sandwich_violation) + ", C1,1 estimate " +
      (r.c11_estimate ? fmt(r.c11_estimate->constant) : std::string("n/a")) + " (ceiling " + fmt(r.c11_ceiling) +
      "), strict margin " + (r.strict_margin ? fmt(*r.strict_margin) : std::string("n/a")) + ".\n";
  finish(out, rep, summary);
  return kOk;
}

}  // namespace

const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names = {"counterexample", "double-well", "eikonal",
                                                 "holder",         "separation",  "insertion"};
  return names;
}

int cmd_demo(const RunConfig& cfg) {
  log_info("demo " + cfg.demo);
  if (cfg.demo == "counterexample") return demo_counterexample(cfg);
  if (cfg.demo == "double-well") return demo_double_well(cfg);
  if (cfg.demo == "eikonal") return demo_eikonal(cfg);
  if (cfg.demo == "holder") return demo_holder(cfg);
  if (cfg.demo == "separation") return demo_separation(cfg);
  if (cfg.demo == "insertion") return demo_insertion(cfg);
  std::string known;
  for (const auto& n : demo_names()) known += (known.empty() ? "" : ", ") + n;
  throw si::InputError("unknown demo '" + cfg.demo + "' (known: " + known + ")");
}

}  // namespace si_cli
