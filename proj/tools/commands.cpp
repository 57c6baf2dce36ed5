#include <fstream>
#include <sstream>

#include "cli_common.hpp"

namespace si_cli {

namespace {

json grid_to_json(const si::ScalarField& f) {
  return {{"dim", f.dim()}, {"shape", f.shape_vector()}, {"domain", si::domain_to_json(f.domain())},
          {"valid_samples", f.valid_count()}};
}

json report_header(const RunConfig& cfg) { return {{"command", cfg.subcommand}, {"config", cfg.to_json()}}; }

si::EnvelopeOptions envelope_options(const RunConfig& cfg, bool witnesses) {
  return {cfg.tol_env, witnesses, cfg.seed};
}

si::InsertionOptions insertion_options(const RunConfig& cfg) {
  si::InsertionOptions o;
  o.tol_ins = cfg.tol_ins;
  o.envelope = envelope_options(cfg, false);
  return o;
}

/// PGM masks without --domain live on the unit box of their raster dimension.
si::ClosedMask load_mask(const std::string& path, const RunConfig& cfg) {
  if (!cfg.domain.empty()) return si::read_mask(path, parse_domain(cfg.domain));
  if (fs::path(path).extension() == ".pgm") {
    std::string header, line;
    std::istringstream raw(si::read_file(path));
    while (std::getline(raw, line)) header += line.substr(0, line.find('#')) + " ";
    std::istringstream in(header);
    std::string magic;
    int cols = 0, rows = 0;
    in >> magic >> cols >> rows;
    const si::Domain unit = rows == 1 ? si::Domain::box({0.0}, {1.0}) : si::Domain::box({0.0, 0.0}, {1.0, 1.0});
    return si::read_mask(path, unit);
  }
  return si::read_mask(path, si::Domain::box({0.0}, {1.0}));
}

double contact_fraction(const si::EnvelopeResult& r) {
  std::size_t on = 0, total = 0;
  si::for_each_valid(r.envelope, [&](std::size_t k) {
    ++total;
    on += r.contact_mask[k];
  });
  return total ? static_cast<double>(on) / total : 0.0;
}

json optional_estimate(const std::function<si::RegularityEstimate()>& fn, const si::ModulusSpec& w, int dim) {
  try {
    return si::estimate_to_json(fn(), w, dim);
  } catch (const si::EstimationError&) {
    return nullptr;
  }
}

}  // namespace

int cmd_envelope(const RunConfig& cfg) {
  const si::ScalarField f = read_field_any(cfg.input);
  log_info("envelope of " + cfg.input + " (" + std::to_string(f.valid_count()) + " samples)");
  const auto eo = envelope_options(cfg, true);
  const si::EnvelopeResult r = si::lower_convex_envelope(f, eo);
  const si::EnvelopeAudit audit = si::audit_envelope(f, r, eo);

  Outputs out(cfg.out_dir);
  out.write_json("envelope.json", si::envelope_to_json(r));
  out.write("witnesses.csv", si::witnesses_to_csv(r));
  if (cfg.emit_plot_data && f.dim() <= 2)
    out.write("envelope_plot.csv", fields_to_csv({"f", "envelope"}, {&f, &r.envelope}));

  json rep = report_header(cfg);
  rep["grid"] = grid_to_json(f);
  rep["method"] = r.method;
  rep["tolerance"] = r.tolerance;
  rep["contact_fraction"] = contact_fraction(r);
  rep["facet_count"] = r.facets.size();
  rep["invariants"] = si::audit_to_json(audit);
  rep["coercivity"] = si::coercivity_to_json(si::check_coercive(f));
  out.write_json("envelope_report.json", rep);
  if (!audit.ok()) {
    log_info("envelope invariants violated; see envelope_report.json");
    return kInvariant;
  }
  return kOk;
}

int cmd_insert(const RunConfig& cfg) {
  const si::ScalarField f = read_field_any(cfg.input);
  const si::ScalarField g = read_field_any(cfg.input_b);
  if (!f.same_grid(g)) throw si::InputError("--input and --input-b must share a grid");
  const si::Domain barrier = si::padded_domain(f, cfg.barrier_pad);
  const auto opts = insertion_options(cfg);
  log_info(std::string(cfg.strict ? "strict " : "") + "insertion on " + std::to_string(f.valid_count()) + " samples");
  const si::InsertionResult r = cfg.strict ? si::insert_strict(f, g, barrier, opts) : si::insert_c11(f, g, barrier, opts);

  Outputs out(cfg.out_dir);
  out.write_json("h.json", si::field_to_json(r.h));
  if (cfg.emit_plot_data && f.dim() <= 2) out.write("insert_plot.csv", fields_to_csv({"h", "f", "g"}, {&r.h, &f, &g}));

  json rep = report_header(cfg);
  rep["grid"] = grid_to_json(f);
  rep["barrier"] = si::domain_to_json(barrier);
  rep["insertion"] = si::insertion_to_json(r);
  rep["checks"] = {{"sandwich_ok", r.sandwich_violation <= cfg.tol_ins},
                   {"c11_under_ceiling", r.c11_estimate ? json(r.c11_estimate->constant <= r.c11_ceiling) : json(nullptr)}};
  out.write_json("insert_report.json", rep);
  return kOk;
}

int cmd_separate(const RunConfig& cfg) {
  const si::ClosedMask A = load_mask(cfg.set_a, cfg);
  si::SeparationOptions opts;
  opts.metric = si::parse_metric(cfg.metric);
  opts.insertion = insertion_options(cfg);
  si::SeparationResult r = [&] {
    if (!cfg.set_b.empty()) {
      const si::ClosedMask B = load_mask(cfg.set_b, cfg);
      log_info("midline separation");
      return si::midline_separate(A, B, opts);
    }
    if (!cfg.radius || !cfg.rho) throw si::InputError("separate needs --set-b, or both --radius and --rho");
    log_info("separation at a=" + si::format_double(*cfg.radius) + " rho=" + si::format_double(*cfg.rho));
    return si::separate(A, *cfg.radius, *cfg.rho, opts);
  }();

  Outputs out(cfg.out_dir);
  out.write_json("sigma.json", si::closed_mask_to_json(si::ClosedMask(A.grid(), r.sigma)));
  out.write("boundary.csv", si::boundary_to_csv(r));
  if (cfg.emit_plot_data) out.write_json("h.json", si::field_to_json(r.h_field));

  json rep = report_header(cfg);
  rep["grid"] = grid_to_json(A.grid());
  rep["separation"] = si::separation_to_json(r);
  out.write_json("separate_report.json", rep);
  return kOk;
}

int cmd_distance(const RunConfig& cfg) {
  const si::ClosedMask A = load_mask(cfg.set_a, cfg);
  const si::MetricKind metric = si::parse_metric(cfg.metric);
  const si::DistanceField d = si::distance_field(A, metric);
  const si::ScalarField& f = d.field;
  log_info("distance field (" + si::metric_name(metric) + ") to " + std::to_string(A.count()) + " samples");

  bool zero_on_source = true;
  for (std::size_t k = 0; k < A.size(); ++k)
    if (A[k] && f[k] != 0.0) zero_on_source = false;
  std::vector<double> mags;
  const double far = 2.0 * f.max_spacing();
  si::for_each_valid(f, [&](std::size_t k) {
    if (f[k] < far) return;
    mags.push_back(si::norm(si::gradient_fd(f, f.index(k)).value, f.dim()));
  });
  std::size_t near_one = 0;
  double mean = 0.0;
  for (double m : mags) {
    near_one += std::abs(m - 1.0) <= 0.05 ? 1 : 0;
    mean += m;
  }

  json identities = json::array();
  identities.push_back(si::identity_to_json(si::check_boundary_distance(A, metric), f.dim()));
  if (cfg.radius) {
    identities.push_back(si::identity_to_json(si::check_tube_distance(A, *cfg.radius, metric), f.dim()));
    identities.push_back(si::identity_to_json(si::check_tube_closure(A, *cfg.radius, metric), f.dim()));
  }

  Outputs out(cfg.out_dir);
  out.write_json("distance.json", si::field_to_json(f));
  if (cfg.emit_plot_data && f.dim() <= 2) out.write("distance_plot.csv", fields_to_csv({"d"}, {&f}));
  json rep = report_header(cfg);
  rep["grid"] = grid_to_json(f);
  rep["metric"] = si::metric_name(metric);
  rep["metrication_factor"] = si::metrication_factor(metric, f.dim());
  rep["source_count"] = A.count();
  rep["max_distance"] = si::value_range(f).second;
  rep["zero_on_source"] = zero_on_source;
  rep["eikonal"] = {{"samples", mags.size()},
                    {"fraction_within_5pct", mags.empty() ? 0.0 : static_cast<double>(near_one) / mags.size()},
                    {"mean_gradient", mags.empty() ? 0.0 : mean / mags.size()},
                    {"histogram", si::gradient_histogram(mags)}};
  rep["identities"] = identities;
  out.write_json("distance_report.json", rep);
  bool ok = zero_on_source;
  for (const auto& c : identities) ok = ok && c["ok"].get<bool>();
  return ok ? kOk : kInvariant;
}

int cmd_verify(const RunConfig& cfg) {
  const si::ScalarField f = read_field_any(cfg.input);
  const si::ModulusSpec w = si::ModulusSpec::parse(cfg.modulus);
  const int n = f.dim();
  json rep = report_header(cfg);
  rep["grid"] = grid_to_json(f);
  rep["modulus"] = si::modulus_to_json(w);
  const auto eo = envelope_options(cfg, true);
  const si::EnvelopeResult env = si::lower_convex_envelope(f, eo);
  const si::EnvelopeAudit audit = si::audit_envelope(f, env, eo);
  rep["f"] = {{"semiconcavity", optional_estimate([&] { return si::estimate_semiconcavity(f, w); }, w, n)},
              {"semiconvexity", optional_estimate([&] { return si::estimate_semiconvexity(f, w); }, w, n)},
              {"coercivity", si::coercivity_to_json(si::check_coercive(f))},
              {"envelope", si::audit_to_json(audit)}};
  bool ok = audit.ok();
  if (!cfg.input_b.empty()) {
    const si::ScalarField g = read_field_any(cfg.input_b);
    if (!f.same_grid(g)) throw si::InputError("--input and --input-b must share a grid");
    double excess = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < f.size(); ++k)
      if (f.valid(k) && g.valid(k)) excess = std::max(excess, f[k] - g[k]);
    const si::InsertionResult r = si::insert_c11(f, g, si::padded_domain(f, cfg.barrier_pad), insertion_options(cfg));
    const bool sandwich = r.sandwich_violation <= cfg.tol_ins;
    const bool ceiling = !r.c11_estimate || r.c11_estimate->constant <= r.c11_ceiling;
    rep["g"] = {{"semiconcavity", optional_estimate([&] { return si::estimate_semiconcavity(g, w); }, w, n)}};
    rep["pair"] = {{"max_f_minus_g", excess},
                   {"insertion", si::insertion_to_json(r)},
                   {"sandwich_ok", sandwich},
                   {"c11_under_ceiling", ceiling}};
    ok = ok && sandwich && ceiling;
  }
  rep["ok"] = ok;
  Outputs out(cfg.out_dir);
  out.write_json("verify_report.json", rep);
  log_info(ok ? "all checks passed" : "checks failed; see verify_report.json");
  return ok ? kOk : kInvariant;
}

}  // namespace si_cli
