#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace netflow {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Points = std::vector<Vec2, Eigen::aligned_allocator<Vec2>>;

inline constexpr double kPi = std::numbers::pi;

/// Left rotation by a quarter turn; the unit normal of a curve is the left
/// rotation of its unit tangent.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 2, 1> rotate_left(const Eigen::MatrixBase<Derived>& v) {
  return {-v(1), v(0)};
}

template <typename Derived>
typename Derived::Scalar cross2(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b) {
  return a(0) * b(1) - a(1) * b(0);
}

inline Vec2 unit_at(double angle) { return {std::cos(angle), std::sin(angle)}; }

inline Mat2 rotation(double angle) {
  Mat2 r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

/// Angle in [0, 2π).
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  if (a >= 2.0 * kPi) a -= 2.0 * kPi;
  return a;
}

inline double angle_of(const Vec2& v) { return wrap_angle(std::atan2(v.y(), v.x())); }

// Error hierarchy. Each failure mode named by the module contracts gets its
// own type so callers (and the CLI exit-code map) can tell them apart.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidCurve : Error {
  using Error::Error;
};
struct InvalidNetwork : Error {
  using Error::Error;
};
struct UnsupportedValence : Error {
  using Error::Error;
};
struct PreconditionError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct RangeError : Error {
  using Error::Error;
};
struct InsufficientData : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};

struct SolverFailure : Error {
  SolverFailure(const std::string& what, double last_residual)
      : Error(what + " (last residual " + std::to_string(last_residual) + ")"), residual(last_residual) {}
  double residual;
};

struct TopologyDegenerate : Error {
  TopologyDegenerate(const std::string& what, int edge_id)
      : Error(what + " (edge " + std::to_string(edge_id) + ")"), edge(edge_id) {}
  int edge;
};

struct FitFailure : Error {
  using Error::Error;
};

struct StepFailure : Error {
  StepFailure(const std::string& what, int vertex_id)
      : Error(what + " (vertex " + std::to_string(vertex_id) + ")"), vertex(vertex_id) {}
  int vertex;
};

struct DegenerateParametrization : Error {
  using Error::Error;
};

struct StartupError : Error {
  using Error::Error;
};

struct InversionFailure : Error {
  InversionFailure(const std::string& what, double last_residual)
      : Error(what + " (residual " + std::to_string(last_residual) + ")"), residual(last_residual) {}
  double residual;
};

}  // namespace netflow
