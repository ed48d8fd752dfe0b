#pragma once

#include "netflow/common.hpp"

namespace netflow {

/// Finite-difference weights on arbitrary nodes (Fornberg). Row k of the
/// result holds the weights of the k-th derivative at x0.
inline Eigen::MatrixXd fornberg_weights(double x0, const Eigen::VectorXd& x, int max_order) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(max_order + 1, n);
  double c1 = 1.0, c4 = x(0) - x0;
  c(0, 0) = 1.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    const int mn = static_cast<int>(std::min<Eigen::Index>(i, max_order));
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x(i) - x0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double c3 = x(i) - x(j);
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c(k, i) = c1 * (k * c(k - 1, i - 1) - c5 * c(k, i - 1)) / c2;
        c(0, i) = -c1 * c5 * c(0, i - 1) / c2;
      }
      for (int k = mn; k >= 1; --k) c(k, j) = (c4 * c(k, j) - k * c(k - 1, j)) / c3;
      c(0, j) = c4 * c(0, j) / c3;
    }
    c1 = c2;
  }
  return c;
}

/// First and second derivatives of sampled points at every node using a
/// `width`-point stencil, shifted inward near the ends.
inline void grid_derivatives(const Eigen::VectorXd& s, const Points& p, Points& d1, Points& d2, int width = 7) {
  const Eigen::Index n = s.size();
  const Eigen::Index w = std::min<Eigen::Index>(width, n);
  d1.assign(static_cast<std::size_t>(n), Vec2::Zero());
  d2.assign(static_cast<std::size_t>(n), Vec2::Zero());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index lo = std::clamp<Eigen::Index>(i - w / 2, 0, n - w);
    const Eigen::MatrixXd c = fornberg_weights(s(i), s.segment(lo, w), 2);
    for (Eigen::Index j = 0; j < w; ++j) {
      d1[static_cast<std::size_t>(i)] += c(1, j) * p[static_cast<std::size_t>(lo + j)];
      d2[static_cast<std::size_t>(i)] += c(2, j) * p[static_cast<std::size_t>(lo + j)];
    }
  }
}

}  // namespace netflow
