#pragma once

#include "netflow/expander.hpp"
#include "netflow/network.hpp"
#include "netflow/topology.hpp"

#include <limits>
#include <optional>

namespace netflow {

// Parametrized network flow d_t gamma = gamma_xx / |gamma_x|^2 with triple
// junctions where the endpoints coincide and the unit tangents sum to zero.

struct JunctionRecord {
  int vertex = -1;
  std::vector<CurveEnd> incident;
  Vec2 position = Vec2::Zero();
};

struct FlowState {
  double t = 0.0;
  Network net;
  std::vector<JunctionRecord> junctions;
  std::vector<Network> history;  ///< optional snapshot ring, filled by evolve
};

/// Interior vertices must be triple junctions; exterior vertices are pinned.
/// Throws PreconditionError otherwise.
FlowState make_state(const Network& net, double t = 0.0);

struct StepOptions {
  double newton_tol = 1e-12;
  int newton_max = 40;
  double speed_floor = 1e-6;  ///< relative to curve length
};

/// One semi-implicit step. StepFailure when the junction Newton stalls,
/// DegenerateParametrization when a junction speed vanishes.
FlowState step(const FlowState& state, double dt, const StepOptions& options = {});

/// Explicit-scheme bound min h^2 |gamma_x|^2 / 2. The semi-implicit step
/// tolerates a large multiple of it.
double stable_dt(const FlowState& state);

/// Resample curves whose parametrization speed dropped below the floor.
/// Returns the number of curves touched.
int repair_parametrization(FlowState& state, double floor = 1e-6);

/// |sum of unit tangents| and max endpoint spread at each junction.
double herring_residual(const FlowState& state);
double coincidence_error(const FlowState& state);

// ---------------------------------------------------------------------------

struct BoundaryOperator {
  std::array<Vec2, 3> tangents{};
  std::array<double, 3> speeds{};
  Mat2 P = Mat2::Zero();
  Vec2 eigenvalues = Vec2::Zero();  ///< ascending
  bool invertible(double tol = 1e-12) const { return eigenvalues(0) > tol * eigenvalues(1); }
};

/// P = sum_j |w_j|^{-1} n_j n_j^T from the outgoing derivatives w_j.
/// DegenerateParametrization on a zero speed.
BoundaryOperator boundary_operator(const std::array<Vec2, 3>& derivatives);
BoundaryOperator boundary_operator(const FlowState& state, int junction);

// ---------------------------------------------------------------------------

struct TransitionEvent {
  double time = 0.0;
  std::vector<int> edges;     ///< vanished curve ids in the pre-event network
  std::vector<int> vertices;  ///< merged vertex ids in the limit network
  Network limit;
  double curvature = 0.0;     ///< max curvature over the cluster
  double edge_length = 0.0;
};

struct UnsupportedSingularity : Error {
  UnsupportedSingularity(const std::string& what, int edge_id, double kappa)
      : Error(what + " (edge " + std::to_string(edge_id) + ", curvature " + std::to_string(kappa) + ")"),
        edge(edge_id), curvature(kappa) {}
  int edge;
  double curvature;
};

/// Max discrete (Menger) curvature over the samples of a curve.
double max_curvature(const PolyCurve& c);
double max_curvature(const Network& net);

/// Event when an internal edge is shorter than eps_edge with curvature at
/// most kappa_cap near it; the limit network contracts every such edge.
/// UnsupportedSingularity when a short edge carries larger curvature.
std::optional<TransitionEvent> detect_transition(const FlowState& state, double eps_edge, double kappa_cap);

// ---------------------------------------------------------------------------

struct StartupOptions {
  double t0 = 0.005;
  double r = 0.3;          ///< excision radius
  int order = 0;           ///< expansion correction order J
  double mesh = 0.01;      ///< target node spacing
  int min_nodes = 8;
  double blend_cap = 0.35;  ///< tangent angle and relative gap allowed at 0.6 r
  int soliton_nodes = 400;
};

struct StartupReport {
  double blend_error = 0.0;
  std::vector<int> resolved;
};

/// Excise radius-r balls around the chosen vertices and insert the scaled
/// soliton slice, glued to the old curves by a C^1 Hermite arc on [0.6 r, r].
FlowState start_from_irregular(const Network& net0, const TopologyChoices& choices, const StartupOptions& options = {},
                               StartupReport* report = nullptr);

/// Network of the slice sqrt(2t) eta inside radius r, leaf ends pinned.
Network soliton_network(const SolitonNetwork& sol, double t, double r, int nodes_per_arc);

// ---------------------------------------------------------------------------

struct Audit {
  double max_coincidence = 0.0;
  double max_herring = 0.0;
  double max_length_increase = 0.0;
  double min_boundary_eigenvalue = std::numeric_limits<double>::infinity();
  bool exterior_pinned = true;
  int steps = 0;
  int rejected = 0;
  int resamples = 0;

  bool length_monotone(double tol = 1e-10) const { return max_length_increase <= tol; }
  bool passed(double diameter) const {
    return exterior_pinned && length_monotone() && max_herring <= 1e-6 && max_coincidence <= 1e-9 * std::max(diameter, 1.0);
  }
};

struct EvolveOptions {
  double dt = 1e-4;
  double cfl = 400.0;          ///< dt <= cfl * stable_dt
  double min_dt = 1e-12;
  std::vector<double> snapshots;
  int resample_every = 0;
  bool detect = false;
  double eps_edge = -1.0;      ///< default 3 x mesh
  double kappa_cap = -1.0;     ///< default 10 x initial max curvature
  StepOptions step;
};

struct Trajectory {
  std::vector<FlowState> snapshots;
  std::vector<double> times, lengths;  ///< per accepted step, starting at the initial state
  Audit audit;
  FlowState final;
  std::optional<TransitionEvent> event;
  std::string halted;  ///< diagnostics when an unsupported singularity stopped the run
};

Trajectory evolve(const FlowState& state, double t_end, const EvolveOptions& options = {});

/// Mean node spacing over all curves.
double mesh_size(const Network& net);

/// Restart through an event: resolve the merged vertices and continue at
/// event.time + t0. Regular limit vertices are passed through.
FlowState restart(const TransitionEvent& event, const TopologyChoices& choices, const StartupOptions& options = {});

// ---------------------------------------------------------------------------

/// Symmetric Hausdorff distance between the networks as point sets.
double geometric_distance(const Network& a, const Network& b, double spacing = 0.0);
double geometric_distance(const FlowState& a, const FlowState& b, double spacing = 0.0);

struct SelfSimilarityOptions {
  int nodes_per_arc = 200;
  double dt = 5e-4;
  int samples = 5;
  double outer = 5.0;    ///< slice radius in rescaled units at t1
  double compare = 3.0;  ///< comparison ball in rescaled units
};

struct SelfSimilarityResult {
  double deviation = 0.0;
  double diameter = 0.0;  ///< of the soliton inside the comparison ball
  std::vector<double> times, deviations;
};

SelfSimilarityResult self_similarity_check(const SolitonNetwork& sol, double t0, double t1,
                                           const SelfSimilarityOptions& options = {});

}  // namespace netflow
