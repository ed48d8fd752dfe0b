#include "netflow/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success, all audits passed\n"
    "  1  run finished but an invariant audit failed\n"
    "  2  usage error\n"
    "  3  input or config could not be read or parsed, or output could not be written\n"
    "  4  invalid network or parameters\n"
    "  5  soliton or chart solver did not converge\n"
    "  6  requested topology collapses (degenerate internal edge)\n"
    "  7  startup failed (blend mismatch; try a smaller --t0)\n"
    "  8  time step failed (junction Newton or degenerate parametrization)\n"
    "  9  singularity with unbounded curvature, run halted\n"
    " 10  internal error\n";

}  // namespace

int main(int argc, char** argv) {
  netflow::RunConfig cfg;
  CLI::App app{"Curvature flow of planar networks with irregular junctions"};
  app.footer(kExitCodes);
  app.set_version_flag("--version", netflow::version_string());
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "JSON run config; flags given on the command line override it");
  app.add_option("-o,--output", cfg.output, "output directory");
  app.add_option("--threads", cfg.threads, "worker threads (recorded; runs are sequential)");
  app.add_option("--seed", cfg.seed, "random seed");

  auto input_opts = [&](CLI::App* s) {
    s->add_option("-i,--input", cfg.input, "network JSON file");
    s->add_option("--fixture", cfg.fixture, "built-in network: cross, triod, bowtie, circle, segment, star5");
    s->add_option("--nodes", cfg.fixture_nodes, "samples per fixture curve");
    s->add_option("--bend", cfg.fixture_bend, "arm curvature of the cross fixture");
    s->add_option("--regular-tol", cfg.regular_tol, "tolerance of the regularity check");
  };
  auto startup_opts = [&](CLI::App* s) {
    s->add_option("--topology", cfg.topology, "per-vertex resolution, e.g. v1:12|34 (vertex labels are 1-based)");
    s->add_option("--t0", cfg.t0, "startup time of the soliton slice");
    s->add_option("--radius", cfg.radius, "excision radius");
    s->add_option("--mesh", cfg.mesh, "target node spacing");
    s->add_option("--order", cfg.order, "expansion correction order J");
  };

  auto* check = app.add_subcommand("check", "validate a network and report vertex regularity");
  input_opts(check);

  auto* solitons = app.add_subcommand("solitons", "solve the expanding solitons of a fan for every resolution");
  input_opts(solitons);
  solitons->add_option("--fan", cfg.fan, "comma-separated ray angles in degrees");
  solitons->add_option("--random-fan", cfg.random_fan, "draw this many ray angles from --seed");
  solitons->add_option("--soliton-radius", cfg.soliton_radius, "truncation radius");
  solitons->add_option("--soliton-nodes", cfg.soliton_nodes, "nodes per external arc");

  auto* resolve = app.add_subcommand("resolve", "insert soliton slices at irregular vertices");
  input_opts(resolve);
  startup_opts(resolve);

  auto* evolve = app.add_subcommand("evolve", "run the flow and write trajectory, frames and manifest");
  input_opts(evolve);
  startup_opts(evolve);
  evolve->add_option("--dt", cfg.dt, "maximal time step");
  evolve->add_option("--t-end", cfg.t_end, "final time");
  evolve->add_option("--snapshots", cfg.snapshots, "number of snapshot intervals");
  evolve->add_flag("--detect", cfg.detect, "stop at standard transitions");
  evolve->add_option("--restart", cfg.restart_topology, "descriptor used to restart through a transition");
  evolve->add_flag("--emit-svg", cfg.emit_svg, "write one SVG frame per snapshot");
  evolve->add_option("--herring-tol", cfg.herring_tol, "audit tolerance on the tangent sum");
  evolve->add_option("--length-tol", cfg.length_tol, "audit tolerance on per-step length increase");

  auto* heat = app.add_subcommand("heatmodel", "exact corner series tables of the heat model");
  heat->add_option("--order", cfg.heat_order, "highest order j");

  auto* expand = app.add_subcommand("expand", "corner expansion of the flow at one irregular vertex");
  input_opts(expand);
  startup_opts(expand);
  expand->add_option("--soliton-radius", cfg.soliton_radius, "truncation radius");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : netflow::exit_code::usage;
  }

  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) {
      std::cerr << "cannot open " << config_file << '\n';
      return netflow::exit_code::io;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    netflow::RunConfig base;
    try {
      base = netflow::config_from_json(ss.str());
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return netflow::exit_code::io;
    }
    // Re-parse on top of the file so explicit flags win.
    cfg = base;
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e) == 0 ? 0 : netflow::exit_code::usage;
    }
  }
  cfg.command = app.get_subcommands().front()->get_name();
  return netflow::run(cfg, std::cout);
}
