#pragma once

#include "netflow/expander.hpp"

#include <functional>

namespace netflow::detail {

/// Wrap to (-pi, pi].
inline double wrap_pm(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

/// Unbounded arc from `start` with tangent angle `theta`, in the self-similar
/// parameter with s = 0 at the start, cut where |eta| reaches R.
ExpanderArc sample_external(const Vec2& start, double theta, double R, int nodes);

/// Bounded arc of the given arclength, parametrized by arclength.
ExpanderArc sample_internal(const Vec2& start, double theta, double length, int nodes);

/// Damped Newton with a forward-difference Jacobian. Returns the final
/// residual max-norm.
double newton(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& F, Eigen::VectorXd& x, double tol,
              int max_iter, const std::function<void(Eigen::VectorXd&)>& project = {});

}  // namespace netflow::detail
