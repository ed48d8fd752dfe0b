#pragma once

#include <Eigen/Core>

namespace netflow::detail {

// Fourth-order first derivative at every node of a uniform grid.
inline Eigen::VectorXd derivative4(const Eigen::VectorXd& f, double h) {
  const Eigen::Index n = f.size() - 1;
  Eigen::VectorXd d(f.size());
  for (Eigen::Index i = 2; i + 2 <= n; ++i) d(i) = (f(i - 2) - 8 * f(i - 1) + 8 * f(i + 1) - f(i + 2)) / (12 * h);
  d(0) = (-25 * f(0) + 48 * f(1) - 36 * f(2) + 16 * f(3) - 3 * f(4)) / (12 * h);
  d(1) = (-3 * f(0) - 10 * f(1) + 18 * f(2) - 6 * f(3) + f(4)) / (12 * h);
  d(n) = (25 * f(n) - 48 * f(n - 1) + 36 * f(n - 2) - 16 * f(n - 3) + 3 * f(n - 4)) / (12 * h);
  d(n - 1) = (3 * f(n) + 10 * f(n - 1) - 18 * f(n - 2) + 6 * f(n - 3) - f(n - 4)) / (12 * h);
  return d;
}

struct Stencil {
  Eigen::Index first;
  double d2[6];
  double d1[6];
  int width;
};

// Stencils for u'' and u' at node i, as coefficients on nodes first..first+width-1.
inline Stencil stencil(Eigen::Index i, Eigen::Index n, double h) {
  const double a = 1.0 / (12 * h * h), b = 1.0 / (12 * h);
  if (i == 1) return {0, {10 * a, -15 * a, -4 * a, 14 * a, -6 * a, a}, {-3 * b, -10 * b, 18 * b, -6 * b, b, 0}, 6};
  if (i == n - 1)
    return {n - 5, {a, -6 * a, 14 * a, -4 * a, -15 * a, 10 * a}, {0, -b, 6 * b, -18 * b, 10 * b, 3 * b}, 6};
  return {i - 2, {-a, 16 * a, -30 * a, 16 * a, -a, 0}, {b, -8 * b, 0, 8 * b, -b, 0}, 5};
}

}  // namespace netflow::detail
