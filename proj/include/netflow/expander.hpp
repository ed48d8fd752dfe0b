#pragma once

#include "netflow/network.hpp"
#include "netflow/topology.hpp"

#include <array>
#include <iosfwd>
#include <optional>

namespace netflow {

// Expanding solitons are geodesic networks of g = exp(|x|^2) |dx|^2. In
// arclength a geodesic satisfies x' = T, theta' = <x, N> with N the left
// normal. External arcs are stored in the self-similar parameter s, where
// eta'' / |eta'|^2 + s eta' - eta = 0 and |eta'| -> 1.

/// Geodesic state after integrating for a given arclength.
struct GeodesicState {
  Vec2 position = Vec2::Zero();
  double theta = 0.0;  ///< tangent angle, not wrapped
};

GeodesicState shoot_geodesic(const Vec2& start, double theta, double length);

/// Tangent angle of the outgoing geodesic at infinity (not wrapped).
double asymptotic_angle(const Vec2& start, double theta, double far_radius = 8.0);

struct ExpanderArc {
  SkeletonArc::Kind kind = SkeletonArc::Kind::External;
  Eigen::VectorXd s;
  Points eta;
  Points deta;                    ///< d eta / ds at the nodes
  std::optional<Vec2> direction;  ///< asymptotic direction, unbounded ends only
  int size() const { return static_cast<int>(eta.size()); }
};

struct SolitonJunction {
  Vec2 position = Vec2::Zero();
  std::array<std::pair<int, End>, 3> incident{};  ///< (arc, which end)
};

struct SolitonNetwork {
  std::vector<ExpanderArc> arcs;  ///< indexed like skeleton(topology).arcs
  TopologyDescriptor topology;
  std::vector<SolitonJunction> junctions;
  Fan fan;
  double radius = 4.0;
  Points seed;  ///< junction positions the Newton solve started from
};

struct SolitonOptions {
  double radius = 4.0;      ///< truncation radius R
  int nodes = 200;          ///< nodes per external arc
  double tolerance = 1e-12;  ///< Newton residual target
  int max_iterations = 60;
  int minimizer_nodes = 48;
};

/// Geodesic from direction theta1 at infinity to direction theta2, sampled
/// inside the ball of radius R.
ExpanderArc geodesic_bvp(double theta1, double theta2, double R = 4.0, int nodes = 200);

/// Throws PreconditionError for incompatible fan and topology, SolverFailure
/// on non-convergence and TopologyDegenerate when an internal edge collapses.
SolitonNetwork solve_soliton(const Fan& fan, const TopologyDescriptor& topology, const SolitonOptions& options = {});

/// max_i |kappa - <eta, nu>| from sixth-order differences in s.
double soliton_residual(const ExpanderArc& arc);
/// Pointwise version of the same residual.
Eigen::VectorXd soliton_residual_profile(const ExpanderArc& arc);

/// |sum of unit tangents| at each junction.
std::vector<double> junction_balance(const SolitonNetwork& sol);

struct AsymptoticFit {
  Vec2 direction = Vec2::Zero();  ///< fitted a, not normalized
  double slope = 0.0;             ///< of log|s eta' - eta| against s^2
  std::vector<double> s, log_mu;  ///< samples used for the slope
};

/// Throws PreconditionError unless the arc is external and reaches s >= 3,
/// FitFailure when |s eta' - eta| is not decreasing.
AsymptoticFit asymptotic_fit(const ExpanderArc& arc, double s_lo = 2.0, double s_hi = 4.0);

/// Physical slice sqrt(2 t0) eta cut to the ball of radius r.
struct SolitonPatch {
  double scale = 1.0;
  std::vector<PolyCurve> arcs;  ///< same orientation and indexing as the soliton arcs
  Points junctions;
};

SolitonPatch truncate_and_scale(const SolitonNetwork& sol, double t0, double r);

/// g-length of the soliton inside the ball of radius r.
double g_length(const SolitonNetwork& sol, double r);
/// g-length of the fan rays inside the ball of radius r.
double fan_g_length(const Fan& fan, double r);

/// Hausdorff distance between the sampled arc sets of two solitons.
double soliton_distance(const SolitonNetwork& a, const SolitonNetwork& b);

/// Discrete critical network of sum exp(|m|^2 / 2) |dx| with ends pinned on the
/// circle of radius R. Arcs follow the skeleton orientation.
struct DiscreteSoliton {
  Points junctions;
  std::vector<Points> arcs;
  double g_length = 0.0;
  int iterations = 0;
};

struct MinimizerOptions {
  double radius = 4.0;
  int nodes = 48;  ///< interior nodes per arc
  int max_iterations = 400;
  double tolerance = 1e-10;
};

DiscreteSoliton minimize_g_length(const Fan& fan, const TopologyDescriptor& topology, const MinimizerOptions& options = {});

/// External soliton arc on a uniform s-grid, with first and second
/// derivatives taken from the ODE state rather than differenced.
struct SolitonProfile {
  Eigen::VectorXd s;
  Points eta, d1, d2;
  double step() const { return s(1) - s(0); }
};

SolitonProfile soliton_profile(const Vec2& start, double theta, double s_max = 10.0, int intervals = 2000);

/// Catalog export: per-arc CSV (s, x, y, residual) and a JSON manifest.
void write_arc_csv(std::ostream& out, const ExpanderArc& arc);
std::string soliton_manifest(const SolitonNetwork& sol);

}  // namespace netflow
