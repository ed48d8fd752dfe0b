#pragma once

#include "netflow/network.hpp"

namespace netflow {

/// Quadratic arc from p leaving in unit direction d and ending at q.
PolyCurve arm_curve(const Vec2& p, const Vec2& d, const Vec2& q, int nodes);

/// Arm for star networks: leaves the center at `angle`, ends at distance
/// `length`; `bend` adds the normal offset bend * length * x^2.
struct RayArm {
  double angle = 0.0;
  double length = 1.0;
  double bend = 0.0;
};

/// One interior vertex at `center` joined to one exterior vertex per arm.
/// Curves start at the center.
Network star_network(const Vec2& center, const std::vector<RayArm>& arms, int nodes);

Network triod_network(double a1, double a2, double a3, int nodes, double length = 1.0);
Network cross_network(int nodes, double bend = 0.0, double length = 1.0);

/// Two triple junctions at (-e, 0), (e, 0) joined by a horizontal edge; the
/// other arms leave at 120 degrees and end at (+-a, +-1).
Network bowtie_network(double a, double e, int nodes);

Network circle_network(double radius, int nodes);
Network segment_network(const Vec2& a, const Vec2& b, int nodes);

}  // namespace netflow
