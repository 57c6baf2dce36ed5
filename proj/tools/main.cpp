#include <CLI11.hpp>
#include <iostream>

#include "cli_common.hpp"

namespace {

using namespace si_cli;

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--out-dir", cfg.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--tol-ins", cfg.tol_ins, "Insertion tolerance")->capture_default_str();
  sub->add_option("--tol-env", cfg.tol_env, "Envelope tolerance, relative to the value range")->capture_default_str();
  sub->add_option("--seed", cfg.seed, "Seed for randomized steps")->capture_default_str();
  sub->add_flag("--emit-plot-data", cfg.emit_plot_data, "Also write plot-ready CSV/JSON");
  sub->add_option("--grid", cfg.grid, "Grid override NxM (demos)");
  sub->add_option("--metric", cfg.metric, "euclidean or grid-length")
      ->check(CLI::IsMember({"euclidean", "grid-length"}))
      ->capture_default_str();
  sub->add_option("--modulus", cfg.modulus, "linear:k or holder:a")->capture_default_str();
}

int run(const RunConfig& cfg) {
  if (!(cfg.tol_ins > 0.0) || !(cfg.tol_env > 0.0)) throw smooth_insert::InputError("tolerances must be positive");
  log_level_from_env();
  if (cfg.subcommand == "envelope") return cmd_envelope(cfg);
  if (cfg.subcommand == "insert") return cmd_insert(cfg);
  if (cfg.subcommand == "separate") return cmd_separate(cfg);
  if (cfg.subcommand == "distance") return cmd_distance(cfg);
  if (cfg.subcommand == "verify") return cmd_verify(cfg);
  return cmd_demo(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  namespace si = smooth_insert;
  RunConfig cfg;
  CLI::App app{"Convex envelopes, C1,1 insertion and separating domains on sampled grids"};
  app.require_subcommand(1);

  auto* env = app.add_subcommand("envelope", "Lower convex envelope of a field");
  env->add_option("--input", cfg.input, "Field file (.json or .csv)")->required();

  auto* ins = app.add_subcommand("insert", "Insert a C1,1 field between f and g");
  ins->add_option("--input", cfg.input, "Semi-convex lower field f")->required();
  ins->add_option("--input-b", cfg.input_b, "Semi-concave upper field g")->required();
  ins->add_option("--barrier-pad", cfg.barrier_pad, "Grow the barrier domain by this many cells")->capture_default_str();
  ins->add_flag("--strict", cfg.strict, "Keep h strictly between f and g off the coincidence set");

  auto* sep = app.add_subcommand("separate", "Separating domain around a closed set");
  sep->add_option("--set-a", cfg.set_a, "Mask of A (.pgm or .json)")->required();
  sep->add_option("--set-b", cfg.set_b, "Mask of B; separates at half the distance");
  sep->add_option("--radius", cfg.radius, "Tube radius a");
  sep->add_option("--rho", cfg.rho, "Level rho in (0, a)");
  sep->add_option("--domain", cfg.domain, "Domain for PGM masks: box:lo,hi,... or ball:c...,R");

  auto* dist = app.add_subcommand("distance", "Distance field to a mask");
  dist->add_option("--set-a", cfg.set_a, "Mask (.pgm or .json)")->required();
  dist->add_option("--radius", cfg.radius, "Also check the tube identities at this radius");
  dist->add_option("--domain", cfg.domain, "Domain for PGM masks");

  auto* ver = app.add_subcommand("verify", "Regularity, envelope and insertion checks");
  ver->add_option("--input", cfg.input, "Field f")->required();
  ver->add_option("--input-b", cfg.input_b, "Optional upper field g");
  ver->add_option("--barrier-pad", cfg.barrier_pad, "Grow the barrier domain by this many cells")->capture_default_str();

  auto* demo = app.add_subcommand("demo", "Run a named demo scenario");
  std::string names;
  for (const auto& n : demo_names()) names += (names.empty() ? "" : ", ") + n;
  demo->add_option("name", cfg.demo, "One of: " + names)->required();

  for (auto* sub : {env, ins, sep, dist, ver, demo}) add_common(sub, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kPrecondition;
  }
  for (auto* sub : app.get_subcommands()) cfg.subcommand = sub->get_name();

  try {
    return run(cfg);
  } catch (const si::ModulationError& e) {
    std::cerr << "modulation error: " << e.what() << '\n';
    return kModulation;
  } catch (const si::InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kInvariant;
  } catch (const si::ResolutionError& e) {
    std::cerr << "resolution error: " << e.what() << '\n';
    return kResolution;
  } catch (const si::LevelError& e) {
    std::cerr << "level selection failed: " << e.what() << '\n';
    return kResolution;
  } catch (const si::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPrecondition;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return kPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInvariant;
  }
}
