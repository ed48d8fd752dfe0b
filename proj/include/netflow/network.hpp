#pragma once

#include "netflow/common.hpp"

#include <optional>

namespace netflow {

/// A sampled parametrized arc x_i -> gamma(x_i), parameters on [0, 1].
class PolyCurve {
 public:
  PolyCurve() = default;
  PolyCurve(Eigen::VectorXd params, Points points, bool closed = false);

  /// Uniform parameter grid over the given samples.
  static PolyCurve uniform(Points points, bool closed = false);

  int size() const { return static_cast<int>(points_.size()); }
  const Eigen::VectorXd& params() const { return params_; }
  const Points& points() const { return points_; }
  bool closed() const { return closed_; }

  const Vec2& front() const { return points_.front(); }
  const Vec2& back() const { return points_.back(); }

  /// d gamma / dx at x = 0 and x = 1 by one-sided second-order differences.
  Vec2 start_derivative() const;
  Vec2 end_derivative() const;

  double length() const;
  PolyCurve reversed() const;

  /// Resample to `nodes` points equally spaced in arclength (uniform params).
  PolyCurve resampled(int nodes) const;

  /// Position at arclength fraction u in [0,1] by linear interpolation.
  Vec2 at_arclength_fraction(double u) const;

 private:
  Eigen::VectorXd params_;
  Points points_;
  bool closed_ = false;
};

enum class End { Start, End };

struct CurveEnd {
  int curve = 0;
  End end = End::Start;
  friend bool operator==(const CurveEnd&, const CurveEnd&) = default;
};

enum class VertexKind { Interior, Exterior };

struct Vertex {
  VertexKind kind = VertexKind::Interior;
  Vec2 position = Vec2::Zero();
  std::vector<CurveEnd> incident;
};

struct Network {
  std::vector<PolyCurve> curves;
  std::vector<Vertex> vertices;

  double diameter() const;
  /// Default geometric tolerance: 1e-9 times the diameter.
  double default_tolerance() const { return 1e-9 * std::max(diameter(), 1.0); }

  Vec2 end_position(const CurveEnd& e) const;
  /// Unit tangent at the given curve end pointing into the curve, away from
  /// the vertex. Throws InvalidCurve on a zero-length end derivative.
  Vec2 outgoing_tangent(const CurveEnd& e) const;

  double total_length() const;
};

struct ValidationOptions {
  std::optional<double> tolerance;  ///< defaults to Network::default_tolerance()
  bool check_embedded = false;      ///< O(M^2) segment sweep
};

/// Throws InvalidNetwork / InvalidCurve when an invariant fails.
void validate(const Network& net, const ValidationOptions& options = {});

struct VertexRegularity {
  int vertex = 0;
  int valence = 0;
  bool regular = false;
  double tangent_sum_norm = 0.0;
  /// Consecutive CCW gaps between outgoing tangents minus 2π/3.
  std::vector<double> angle_defects;
  double max_deviation = 0.0;
};

struct RegularityReport {
  std::vector<VertexRegularity> vertices;  ///< interior vertices only
  bool all_regular() const;
  std::vector<int> irregular_vertices() const;
};

RegularityReport check_regular(const Network& net, double tol);

/// Ordered rays at an interior vertex.
struct Fan {
  Vec2 center = Vec2::Zero();
  std::vector<Vec2> directions;  ///< unit, CCW by angle in [0, 2π)
  int vertex = -1;               ///< source vertex, -1 for synthetic fans
  std::vector<CurveEnd> ends;    ///< curve end per direction, when extracted

  int valence() const { return static_cast<int>(directions.size()); }
  std::vector<double> angles() const;

  static Fan from_angles(const std::vector<double>& angles, Vec2 center = Vec2::Zero());
  Fan rotated(double phi) const;
};

std::vector<Fan> extract_fans(const Network& net);

}  // namespace netflow
