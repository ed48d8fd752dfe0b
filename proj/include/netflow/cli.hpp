#pragma once

#include "netflow/topology.hpp"

#include <iosfwd>
#include <string>

namespace netflow {

/// Everything a run depends on. Vertex labels in topology strings are
/// 1-based ("v1:12|34" is vertex 0).
struct RunConfig {
  std::string command;
  std::string input;          ///< network JSON; empty selects `fixture`
  std::string fixture = "cross";
  int fixture_nodes = 101;
  double fixture_bend = 0.0;
  std::vector<std::string> topology;
  std::string restart_topology;

  double t0 = 0.005;
  double radius = 0.3;        ///< excision radius
  double dt = 1e-4;
  double t_end = 0.1;
  double mesh = 0.01;
  int order = 0;              ///< expansion order J
  int snapshots = 5;
  unsigned seed = 0;
  bool detect = false;
  bool emit_svg = false;
  int threads = 1;

  int heat_order = 12;
  std::string fan;            ///< comma-separated degrees for `solitons`
  int random_fan = 0;         ///< draw this many directions from `seed` instead
  double soliton_radius = 4.0;
  int soliton_nodes = 200;

  double regular_tol = 1e-6;
  double herring_tol = 1e-6;
  double length_tol = 1e-10;

  std::string output = "out";
};

std::string config_to_json(const RunConfig& c);
/// Unknown keys are rejected with ParseError.
RunConfig config_from_json(const std::string& text);
/// Throws PreconditionError for non-positive tolerances or parameters.
void check_config(const RunConfig& c);

/// "v3:12|34" entries against the network's fans.
TopologyChoices parse_choices(const std::vector<std::string>& specs, const Network& net);

namespace exit_code {
constexpr int ok = 0;
constexpr int audit_failed = 1;
constexpr int usage = 2;
constexpr int io = 3;
constexpr int invalid_input = 4;
constexpr int solver = 5;
constexpr int topology_degenerate = 6;
constexpr int startup = 7;
constexpr int step = 8;
constexpr int singularity = 9;
constexpr int internal = 10;
}  // namespace exit_code

/// Executes the subcommand, writes artifacts and manifest.json under
/// config.output and maps library errors to exit codes.
int run(const RunConfig& config, std::ostream& log);

std::string version_string();

}  // namespace netflow
