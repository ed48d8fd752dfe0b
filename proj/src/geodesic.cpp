#include "expander_detail.hpp"

#include <boost/numeric/odeint.hpp>

namespace netflow {

namespace odeint = boost::numeric::odeint;

namespace {

using State3 = std::array<double, 3>;
using State5 = std::array<double, 5>;

constexpr double kTol = 1e-13;

void arclength_rhs(const State3& y, State3& dy, double) {
  const double c = std::cos(y[2]), s = std::sin(y[2]);
  dy[0] = c;
  dy[1] = s;
  dy[2] = -y[0] * s + y[1] * c;
}

// (x, y, theta, sigma, v) in the self-similar parameter.
void similarity_rhs(const State5& y, State5& dy, double s) {
  const double c = std::cos(y[2]), sn = std::sin(y[2]), v = y[4];
  const double along = y[0] * c + y[1] * sn;
  const double normal = -y[0] * sn + y[1] * c;
  dy[0] = v * c;
  dy[1] = v * sn;
  dy[2] = v * normal;
  dy[3] = v;
  dy[4] = v * v * (along - s * v);
}

template <typename State, typename Rhs>
void advance(Rhs rhs, State& y, double t0, double t1) {
  if (t1 == t0) return;
  auto stepper = odeint::make_controlled(kTol, kTol, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_adaptive(stepper, rhs, y, t0, t1, (t1 > t0 ? 1.0 : -1.0) * 1e-3);
}

constexpr double kFarS = 6.0;

State5 similarity_start(const Vec2& start, double theta, double v0) { return {start.x(), start.y(), theta, 0.0, v0}; }

// Initial speed for which |eta'| -> 1.
double normalized_speed(const Vec2& start, double theta) {
  auto miss = [&](double v0) {
    State5 y = similarity_start(start, theta, v0);
    advance(similarity_rhs, y, 0.0, kFarS);
    return y[4] - 1.0;
  };
  double a = 1.0, fa = miss(a);
  double b = 1.05, fb = miss(b);
  for (int it = 0; it < 60 && std::abs(fb) > 1e-14; ++it) {
    if (fb == fa) break;
    const double c = b - fb * (b - a) / (fb - fa);
    a = b, fa = fb;
    b = std::clamp(c, 0.2 * b, 5.0 * b);
    fb = miss(b);
  }
  if (!(std::abs(fb) < 1e-10)) throw SolverFailure("normalized speed did not converge", std::abs(fb));
  return b;
}

std::vector<double> graded_grid(double end, int nodes) {
  std::vector<double> s(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    const double u = static_cast<double>(i) / (nodes - 1);
    s[static_cast<std::size_t>(i)] = end * 0.5 * u * (1.0 + u);
  }
  return s;
}

}  // namespace

GeodesicState shoot_geodesic(const Vec2& start, double theta, double length) {
  State3 y{start.x(), start.y(), theta};
  advance(arclength_rhs, y, 0.0, length);
  return {{y[0], y[1]}, y[2]};
}

double asymptotic_angle(const Vec2& start, double theta, double far_radius) {
  State3 y{start.x(), start.y(), theta};
  double t = 0.0;
  const double budget = 4.0 * far_radius + 4.0 * start.norm() + 10.0;
  while (t < budget) {
    advance(arclength_rhs, y, t, t + 0.5);
    t += 0.5;
    const double r = std::hypot(y[0], y[1]);
    const double out = y[0] * std::cos(y[2]) + y[1] * std::sin(y[2]);
    if (r >= far_radius && out > 0.0) return y[2];
  }
  throw SolverFailure("geodesic did not leave the far ball", t);
}

SolitonProfile soliton_profile(const Vec2& start, double theta, double s_max, int intervals) {
  if (intervals < 4 || !(s_max > 0.0)) throw PreconditionError("profile grid needs s_max > 0 and at least 4 intervals");
  const double v0 = normalized_speed(start, theta);
  SolitonProfile p;
  p.s = Eigen::VectorXd::LinSpaced(intervals + 1, 0.0, s_max);
  State5 y = similarity_start(start, theta, v0);
  double at = 0.0;
  for (Eigen::Index i = 0; i <= intervals; ++i) {
    advance(similarity_rhs, y, at, p.s(i));
    at = p.s(i);
    const Vec2 x(y[0], y[1]), T = unit_at(y[2]), N = rotate_left(T);
    const double v = y[4];
    p.eta.push_back(x);
    p.d1.push_back(v * T);
    p.d2.push_back(v * v * ((x.dot(T) - at * v) * T + x.dot(N) * N));
  }
  return p;
}

namespace detail {

ExpanderArc sample_external(const Vec2& start, double theta, double R, int nodes) {
  if (start.norm() >= R) throw RangeError("junction outside the truncation ball");
  const double v0 = normalized_speed(start, theta);

  // Locate s_R with |eta(s_R)| = R.
  State5 y = similarity_start(start, theta, v0);
  double s = 0.0, s_R = -1.0;
  const double ds = 0.01;
  while (s < kFarS + R) {
    State5 prev = y;
    advance(similarity_rhs, y, s, s + ds);
    if (std::hypot(y[0], y[1]) >= R) {
      double lo = s, hi = s + ds;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        State5 z = prev;
        advance(similarity_rhs, z, s, mid);
        (std::hypot(z[0], z[1]) >= R ? hi : lo) = mid;
      }
      s_R = hi;
      break;
    }
    s += ds;
  }
  if (s_R < 0.0) throw SolverFailure("arc did not reach the truncation radius", s);

  ExpanderArc arc;
  arc.kind = SkeletonArc::Kind::External;
  const auto grid = graded_grid(s_R, nodes);
  arc.s = Eigen::Map<const Eigen::VectorXd>(grid.data(), nodes);
  y = similarity_start(start, theta, v0);
  double at = 0.0;
  for (double g : grid) {
    advance(similarity_rhs, y, at, g);
    at = g;
    arc.eta.emplace_back(y[0], y[1]);
    arc.deta.push_back(y[4] * unit_at(y[2]));
  }
  arc.direction = unit_at(asymptotic_angle(start, theta));
  return arc;
}

ExpanderArc sample_internal(const Vec2& start, double theta, double length, int nodes) {
  ExpanderArc arc;
  arc.kind = SkeletonArc::Kind::Internal;
  arc.s = Eigen::VectorXd::LinSpaced(nodes, 0.0, length);
  State3 y{start.x(), start.y(), theta};
  double at = 0.0;
  for (Eigen::Index i = 0; i < nodes; ++i) {
    advance(arclength_rhs, y, at, arc.s(i));
    at = arc.s(i);
    arc.eta.emplace_back(y[0], y[1]);
    arc.deta.push_back(unit_at(y[2]));
  }
  return arc;
}

double newton(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& F, Eigen::VectorXd& x, double tol,
              int max_iter, const std::function<void(Eigen::VectorXd&)>& project) {
  Eigen::VectorXd r = F(x);
  double norm = r.lpNorm<Eigen::Infinity>();
  const Eigen::Index n = x.size();
  for (int it = 0; it < max_iter && norm > tol; ++it) {
    Eigen::MatrixXd J(r.size(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double h = 1e-7 * std::max(1.0, std::abs(x(k)));
      Eigen::VectorXd xp = x;
      xp(k) += h;
      J.col(k) = (F(xp) - r) / h;
    }
    const Eigen::VectorXd step = J.colPivHouseholderQr().solve(-r);
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      Eigen::VectorXd trial = x + lambda * step;
      if (project) project(trial);
      Eigen::VectorXd rt;
      try {
        rt = F(trial);
      } catch (const SolverFailure&) {
        continue;
      }
      const double nt = rt.lpNorm<Eigen::Infinity>();
      if (nt < norm || (nt <= 10.0 * tol && nt <= norm * 1.0000001)) {
        x = trial;
        r = rt;
        norm = nt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return norm;
}

}  // namespace detail

ExpanderArc geodesic_bvp(double theta1, double theta2, double R, int nodes) {
  using detail::wrap_pm;
  if (std::abs(wrap_pm(theta2 - theta1)) < 1e-12) throw PreconditionError("geodesic needs distinct end directions");
  // Unknowns (phi, rho): closest point rho u(phi), tangent u(phi + pi/2)
  // pointing toward the theta2 end.
  const double gap = wrap_angle(theta2 - theta1);
  Eigen::VectorXd x(2);
  x << theta1 + 0.5 * gap, 0.0;
  auto F = [&](const Eigen::VectorXd& z) {
    const Vec2 p = z(1) * unit_at(z(0));
    Eigen::VectorXd r(2);
    r(0) = wrap_pm(asymptotic_angle(p, z(0) + 0.5 * kPi) - theta2);
    r(1) = wrap_pm(asymptotic_angle(p, z(0) - 0.5 * kPi) - theta1);
    return r;
  };
  // Start from a chord with the right opening: rho grows as the gap shrinks.
  if (gap < kPi) x(1) = std::sqrt(std::max(0.0, -2.0 * std::log(std::max(gap / kPi, 1e-3))));
  if (gap > kPi) x(1) = -std::sqrt(std::max(0.0, -2.0 * std::log(std::max((2.0 * kPi - gap) / kPi, 1e-3))));
  const double res = detail::newton(F, x, 1e-12, 60);
  if (!(res <= 1e-10)) throw SolverFailure("geodesic boundary value problem did not converge", res);

  const Vec2 p = x(1) * unit_at(x(0));
  if (p.norm() >= R) throw RangeError("geodesic lies outside the truncation ball");
  const int half_nodes = nodes / 2 + 1;
  const ExpanderArc fwd = detail::sample_external(p, x(0) + 0.5 * kPi, R, half_nodes);
  const ExpanderArc bwd = detail::sample_external(p, x(0) - 0.5 * kPi, R, half_nodes);
  ExpanderArc arc;
  arc.kind = SkeletonArc::Kind::Geodesic;
  const Eigen::Index nb = bwd.s.size(), nf = fwd.s.size();
  arc.s.resize(nb + nf - 1);
  for (Eigen::Index i = 0; i < nb; ++i) {
    const auto k = static_cast<std::size_t>(nb - 1 - i);
    arc.s(i) = -bwd.s(nb - 1 - i);
    arc.eta.push_back(bwd.eta[k]);
    arc.deta.push_back(-bwd.deta[k]);
  }
  for (Eigen::Index i = 1; i < nf; ++i) {
    arc.s(nb - 1 + i) = fwd.s(i);
    arc.eta.push_back(fwd.eta[static_cast<std::size_t>(i)]);
    arc.deta.push_back(fwd.deta[static_cast<std::size_t>(i)]);
  }
  arc.direction = unit_at(theta2);
  return arc;
}

}  // namespace netflow
