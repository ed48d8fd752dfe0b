#pragma once

#include "netflow/polynomial.hpp"

#include <Eigen/Core>

#include <functional>

namespace netflow {

/// Uniform grid on [0, s_max] for decaying correctors.
struct ModeGrid {
  double s_max = 10.0;
  int intervals = 2000;
  double step() const { return s_max / intervals; }
};

/// Solution of u'' + s u' - n u = R on s >= 0 split as P(s) + z(s), with P a
/// polynomial and z decaying (z = 0 beyond the grid).
struct ModeSolution {
  int n = 0;
  Polynomial<double> poly;
  ModeGrid grid;
  Eigen::VectorXd z;   ///< corrector at grid nodes
  Eigen::VectorXd dz;  ///< its derivative at grid nodes
  std::function<double(double)> rhs_decaying;  ///< decaying part of R, may be empty

  double corrector(double s) const;
  double corrector_derivative(double s) const;
  double value(double s) const { return poly(s) + corrector(s); }
  double derivative(double s) const { return poly.derivative()(s) + corrector_derivative(s); }
  /// From the equation: u'' = R + n u - s u'.
  double second_derivative(double s, const Polynomial<double>& rhs_poly = {}) const;

  /// Max over interior grid nodes of the 4th-order discrete residual of the
  /// corrector equation.
  double discrete_residual() const;
};

/// Polynomial solution of P'' + s P' - n P = R_poly with deg P = n and
/// leading coefficient `leading`. Requires deg R_poly <= n - 1.
Polynomial<double> mode_polynomial(int n, const Polynomial<double>& rhs_poly, double leading);

/// Full solve with u(0) = bc0. `rhs_decaying` is the rapidly decaying part of
/// R, evaluated at grid nodes.
ModeSolution solve_mode(int n, const Polynomial<double>& rhs_poly, double leading, double bc0,
                        const std::function<double(double)>& rhs_decaying = {}, const ModeGrid& grid = {});

}  // namespace netflow
