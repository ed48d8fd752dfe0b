#include "netflow/flow.hpp"

#include "netflow/expansion.hpp"
#include "netflow/stencil.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <map>

namespace netflow {

namespace {

constexpr int kPinned = -1;

// Where a curve end is attached: a junction index or a pinned vertex.
struct Terminal {
  int junction = kPinned;
  int vertex = -1;
};

std::vector<std::array<Terminal, 2>> terminals(const FlowState& s) {
  std::vector<std::array<Terminal, 2>> out(s.net.curves.size());
  for (std::size_t v = 0; v < s.net.vertices.size(); ++v)
    for (const auto& e : s.net.vertices[v].incident)
      out[static_cast<std::size_t>(e.curve)][e.end == End::End].vertex = static_cast<int>(v);
  for (std::size_t j = 0; j < s.junctions.size(); ++j)
    for (const auto& e : s.junctions[j].incident)
      out[static_cast<std::size_t>(e.curve)][e.end == End::End].junction = static_cast<int>(j);
  return out;
}

// Tridiagonal rows a x_{i-1} + b x_i + c x_{i+1}; the matrix is strictly
// diagonally dominant so no pivoting is needed.
Eigen::MatrixXd thomas(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c, Eigen::MatrixXd d) {
  const Eigen::Index n = b.size();
  Eigen::VectorXd cp(n);
  double m = b(0);
  cp(0) = c(0) / m;
  d.row(0) /= m;
  for (Eigen::Index i = 1; i < n; ++i) {
    m = b(i) - a(i) * cp(i - 1);
    cp(i) = c(i) / m;
    d.row(i) = (d.row(i) - a(i) * d.row(i - 1)) / m;
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) d.row(i) -= cp(i) * d.row(i + 1);
  return d;
}

// New samples are affine in the two endpoint positions:
// gamma_k = base_k + gs_k P_start + ge_k P_end.
struct OpenSolve {
  Eigen::MatrixXd base;
  Eigen::VectorXd gs, ge;
  // Outgoing derivative at each end: alpha P_own + beta P_other + c.
  std::array<double, 2> alpha{}, beta{};
  std::array<Vec2, 2> c{};
};

Vec2 row(const Eigen::MatrixXd& m, Eigen::Index i) { return m.row(i).transpose(); }

OpenSolve solve_open(const PolyCurve& curve, double dt) {
  const auto& x = curve.params();
  const auto& p = curve.points();
  const Eigen::Index n = x.size(), m = n - 2;
  OpenSolve out;
  out.base = Eigen::MatrixXd::Zero(n, 2);
  out.gs = Eigen::VectorXd::Zero(n);
  out.ge = Eigen::VectorXd::Zero(n);
  out.gs(0) = 1.0;
  out.ge(n - 1) = 1.0;
  if (m > 0) {
    Eigen::VectorXd a(m), b(m), c(m);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 4);
    for (Eigen::Index i = 1; i <= m; ++i) {
      const Eigen::MatrixXd w = fornberg_weights(x(i), x.segment(i - 1, 3), 2);
      const Vec2 d1 = w(1, 0) * p[static_cast<std::size_t>(i - 1)] + w(1, 1) * p[static_cast<std::size_t>(i)] +
                      w(1, 2) * p[static_cast<std::size_t>(i + 1)];
      const double speed2 = d1.squaredNorm();
      if (!(speed2 > 0.0)) throw DegenerateParametrization("zero speed at an interior node");
      const double k = dt / speed2;
      a(i - 1) = -k * w(2, 0);
      b(i - 1) = 1.0 - k * w(2, 1);
      c(i - 1) = -k * w(2, 2);
      rhs.block(i - 1, 0, 1, 2) = p[static_cast<std::size_t>(i)].transpose();
    }
    rhs(0, 2) = -a(0);
    rhs(m - 1, 3) = -c(m - 1);
    a(0) = 0.0;
    c(m - 1) = 0.0;
    const Eigen::MatrixXd sol = thomas(a, b, c, rhs);
    out.base.middleRows(1, m) = sol.leftCols(2);
    out.gs.segment(1, m) = sol.col(2);
    out.ge.segment(1, m) = sol.col(3);
  }
  const Eigen::Index w = std::min<Eigen::Index>(3, n);
  const Eigen::MatrixXd ws = fornberg_weights(x(0), x.head(w), 1);
  Eigen::VectorXd xe(w);
  for (Eigen::Index k = 0; k < w; ++k) xe(k) = x(n - 1 - k);
  const Eigen::MatrixXd we = fornberg_weights(x(n - 1), xe, 1);
  out.c = {Vec2::Zero(), Vec2::Zero()};
  for (Eigen::Index k = 0; k < w; ++k) {
    out.alpha[0] += ws(1, k) * out.gs(k);
    out.beta[0] += ws(1, k) * out.ge(k);
    out.c[0] += ws(1, k) * row(out.base, k);
    const Eigen::Index q = n - 1 - k;
    out.alpha[1] -= we(1, k) * out.ge(q);
    out.beta[1] -= we(1, k) * out.gs(q);
    out.c[1] -= we(1, k) * row(out.base, q);
  }
  return out;
}

PolyCurve step_closed(const PolyCurve& curve, double dt) {
  const auto& x = curve.params();
  const auto& p = curve.points();
  const Eigen::Index N = x.size() - 1;  // unique samples
  if (N < 3) throw DegenerateParametrization("closed curve needs at least three samples");
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::MatrixXd rhs(N, 2);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Eigen::Index im = (i + N - 1) % N, ip = (i + 1) % N;
    Eigen::VectorXd xs(3);
    xs << (i == 0 ? x(N - 1) - 1.0 : x(im)), x(i), x(i + 1);
    const Eigen::MatrixXd w = fornberg_weights(x(i), xs, 2);
    const Vec2 d1 = w(1, 0) * p[static_cast<std::size_t>(im)] + w(1, 1) * p[static_cast<std::size_t>(i)] +
                    w(1, 2) * p[static_cast<std::size_t>(ip)];
    const double speed2 = d1.squaredNorm();
    if (!(speed2 > 0.0)) throw DegenerateParametrization("zero speed on a closed curve");
    const double k = dt / speed2;
    trip.emplace_back(i, im, -k * w(2, 0));
    trip.emplace_back(i, i, 1.0 - k * w(2, 1));
    trip.emplace_back(i, ip, -k * w(2, 2));
    rhs.row(i) = p[static_cast<std::size_t>(i)].transpose();
  }
  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
  if (lu.info() != Eigen::Success) throw DegenerateParametrization("closed-curve system is singular");
  const Eigen::MatrixXd sol = lu.solve(rhs);
  Points q(static_cast<std::size_t>(N + 1));
  for (Eigen::Index i = 0; i < N; ++i) q[static_cast<std::size_t>(i)] = row(sol, i);
  q.back() = q.front();
  return PolyCurve(x, std::move(q), true);
}

Vec2 outgoing_derivative(const Network& net, const CurveEnd& e) {
  const auto& c = net.curves[static_cast<std::size_t>(e.curve)];
  return e.end == End::Start ? c.start_derivative() : Vec2(-c.end_derivative());
}

double min_speed(const PolyCurve& c) {
  const auto& x = c.params();
  const auto& p = c.points();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < p.size(); ++i)
    lo = std::min(lo, (p[i] - p[i - 1]).norm() / (x(static_cast<Eigen::Index>(i)) - x(static_cast<Eigen::Index>(i) - 1)));
  return lo;
}

double point_segment(const Vec2& q, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double l2 = d.squaredNorm();
  const double u = l2 > 0.0 ? std::clamp((q - a).dot(d) / l2, 0.0, 1.0) : 0.0;
  return (q - a - u * d).norm();
}

// Smooth translation of the nodes near one end, flat at the end itself so the
// end tangent is preserved.
void drag_end(Points& pts, End end, const Vec2& target, double reach) {
  const std::size_t n = pts.size();
  auto idx = [&](std::size_t k) { return end == End::Start ? k : n - 1 - k; };
  const Vec2 d = target - pts[idx(0)];
  std::vector<double> s(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) s[k] = s[k - 1] + (pts[idx(k)] - pts[idx(k - 1)]).norm();
  for (std::size_t k = 1; k < n && s[k] < reach; ++k) {
    const double u = s[k] / reach;
    pts[idx(k)] += (1.0 - u * u * (3.0 - 2.0 * u)) * d;
  }
  pts[idx(0)] = target;
}

struct Contraction {
  Network net;
  std::vector<int> vertex_map;  // old -> new, merged pair both map to the merged id
  std::vector<int> curve_map;   // old -> new, -1 for the removed edge
  int merged = -1;
};

Contraction contract_edge(const Network& net, int edge) {
  const auto& c = net.curves[static_cast<std::size_t>(edge)];
  int va = -1, vb = -1;
  for (std::size_t v = 0; v < net.vertices.size(); ++v)
    for (const auto& e : net.vertices[v].incident)
      if (e.curve == edge) (e.end == End::Start ? va : vb) = static_cast<int>(v);
  if (va < 0 || vb < 0 || va == vb) throw PreconditionError("edge to contract must join two distinct vertices");
  const Vec2 mid = c.at_arclength_fraction(0.5);

  Contraction out;
  out.curve_map.assign(net.curves.size(), -1);
  for (std::size_t k = 0, next = 0; k < net.curves.size(); ++k)
    if (static_cast<int>(k) != edge) out.curve_map[k] = static_cast<int>(next++);
  out.vertex_map.assign(net.vertices.size(), -1);
  for (std::size_t v = 0, next = 0; v < net.vertices.size(); ++v)
    if (static_cast<int>(v) != vb) out.vertex_map[v] = static_cast<int>(next++);
  out.vertex_map[static_cast<std::size_t>(vb)] = out.vertex_map[static_cast<std::size_t>(va)];
  out.merged = out.vertex_map[static_cast<std::size_t>(va)];

  std::vector<Points> pts;
  for (const auto& k : net.curves) pts.push_back(k.points());
  for (int v : {va, vb})
    for (const auto& e : net.vertices[static_cast<std::size_t>(v)].incident) {
      if (e.curve == edge) continue;
      auto& q = pts[static_cast<std::size_t>(e.curve)];
      const double len = net.curves[static_cast<std::size_t>(e.curve)].length();
      const double shift = (mid - (e.end == End::Start ? q.front() : q.back())).norm();
      drag_end(q, e.end, mid, std::min(0.45 * len, std::max(20.0 * shift, 1e-12)));
    }
  for (std::size_t k = 0; k < net.curves.size(); ++k)
    if (static_cast<int>(k) != edge)
      out.net.curves.emplace_back(net.curves[k].params(), pts[k], net.curves[k].closed());
  for (std::size_t v = 0; v < net.vertices.size(); ++v) {
    if (static_cast<int>(v) == vb) continue;
    Vertex nv = net.vertices[v];
    if (static_cast<int>(v) == va) {
      nv.position = mid;
      nv.incident.clear();
      for (int w : {va, vb})
        for (const auto& e : net.vertices[static_cast<std::size_t>(w)].incident)
          if (e.curve != edge) nv.incident.push_back(e);
    }
    for (auto& e : nv.incident) e.curve = out.curve_map[static_cast<std::size_t>(e.curve)];
    out.net.vertices.push_back(std::move(nv));
  }
  return out;
}

// ---------------------------------------------------------------------------
// startup helpers

// First crossing of |p - C| = rho walking away from pts[0].
std::optional<std::pair<std::size_t, double>> first_exit(const Points& pts, const Vec2& C, double rho) {
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if ((pts[i] - C).norm() < rho) continue;
    const Vec2 a = pts[i - 1] - C, d = pts[i] - pts[i - 1];
    const double A = d.squaredNorm(), B = 2.0 * a.dot(d), Cq = a.squaredNorm() - rho * rho;
    const double disc = std::max(0.0, B * B - 4.0 * A * Cq);
    const double u = std::clamp((-B + std::sqrt(disc)) / (2.0 * A), 0.0, 1.0);
    return std::make_pair(i, u);
  }
  return std::nullopt;
}

Vec2 chord_tangent(const Vec2& a, const Vec2& b, const Vec2& c) {
  // Derivative at a from a parabola through a, b, c in chord-length parameter.
  const double h1 = (b - a).norm(), h2 = (c - b).norm();
  const Vec2 d = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * a + (h1 + h2) / (h1 * h2) * b - h1 / (h2 * (h1 + h2)) * c;
  return d.normalized();
}

Points dedupe(const Points& in, double tol) {
  Points out;
  for (const auto& p : in)
    if (out.empty() || (p - out.back()).norm() > tol) out.push_back(p);
  if (out.size() >= 2 && (in.back() - out.back()).norm() > 0.0) out.back() = in.back();
  return out;
}

// Points after the first exit from the ball, starting at the crossing.
Points trim_front(const Points& pts, const Vec2& C, double rho, const std::string& what) {
  const auto hit = first_exit(pts, C, rho);
  if (!hit) throw StartupError(what + " does not leave the excision ball; use a smaller radius");
  const auto [i, u] = *hit;
  Points out{(1.0 - u) * pts[i - 1] + u * pts[i]};
  out.insert(out.end(), pts.begin() + static_cast<std::ptrdiff_t>(i), pts.end());
  return out;
}

Points hermite_bridge(const Vec2& p0, const Vec2& t0, const Vec2& p1, const Vec2& t1, double mesh) {
  const double m = (p1 - p0).norm();
  const int n = std::max(4, static_cast<int>(std::ceil(1.5 * m / mesh)));
  Points out;
  for (int k = 1; k < n; ++k) {
    const double u = static_cast<double>(k) / n, u2 = u * u, u3 = u2 * u;
    out.push_back((2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * m * t0 + (-2 * u3 + 3 * u2) * p1 + (u3 - u2) * m * t1);
  }
  return out;
}

Points reversed_points(Points p) {
  std::reverse(p.begin(), p.end());
  return p;
}

// Restrict a polyline to the ball |p| <= R, splitting where it leaves.
std::vector<Points> clip_to_ball(const Points& pts, double R) {
  std::vector<Points> out;
  Points cur;
  auto cross = [&](const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double A = d.squaredNorm(), B = 2.0 * a.dot(d), C = a.squaredNorm() - R * R;
    const double disc = std::max(0.0, B * B - 4.0 * A * C), sq = std::sqrt(disc);
    double u = (-B + sq) / (2.0 * A);
    if (u < 0.0 || u > 1.0) u = (-B - sq) / (2.0 * A);
    return Vec2(a + std::clamp(u, 0.0, 1.0) * d);
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const bool in = pts[i].norm() <= R;
    if (i > 0) {
      const bool was = pts[i - 1].norm() <= R;
      if (was && !in) {
        cur.push_back(cross(pts[i - 1], pts[i]));
        if (cur.size() >= 2) out.push_back(cur);
        cur.clear();
      } else if (!was && in) {
        cur.push_back(cross(pts[i - 1], pts[i]));
      }
    }
    if (in) cur.push_back(pts[i]);
  }
  if (cur.size() >= 2) out.push_back(cur);
  return out;
}

double directed_hausdorff(const std::vector<Points>& from, const std::vector<Points>& to) {
  double worst = 0.0;
  for (const auto& poly : from)
    for (const auto& q : poly) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& t : to) {
        if (t.size() == 1) best = std::min(best, (q - t[0]).norm());
        for (std::size_t k = 1; k < t.size() && best > 0.0; ++k) best = std::min(best, point_segment(q, t[k - 1], t[k]));
      }
      worst = std::max(worst, best);
    }
  return worst;
}

std::vector<Points> densify(const std::vector<Points>& polys, double spacing) {
  std::vector<Points> out;
  for (const auto& p : polys) {
    Points d;
    for (std::size_t k = 1; k < p.size(); ++k) {
      const double len = (p[k] - p[k - 1]).norm();
      const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
      for (int j = 0; j < n; ++j) d.push_back(p[k - 1] + (static_cast<double>(j) / n) * (p[k] - p[k - 1]));
    }
    if (!p.empty()) d.push_back(p.back());
    out.push_back(std::move(d));
  }
  return out;
}

double set_distance(const std::vector<Points>& a, const std::vector<Points>& b, double spacing) {
  return std::max(directed_hausdorff(densify(a, spacing), b), directed_hausdorff(densify(b, spacing), a));
}

std::vector<Points> polylines(const Network& net) {
  std::vector<Points> out;
  for (const auto& c : net.curves) out.push_back(c.points());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

FlowState make_state(const Network& net, double t) {
  validate(net);
  FlowState s;
  s.t = t;
  s.net = net;
  for (std::size_t v = 0; v < net.vertices.size(); ++v) {
    const auto& vx = net.vertices[v];
    if (vx.kind != VertexKind::Interior) continue;
    if (vx.incident.size() != 3)
      throw PreconditionError("vertex " + std::to_string(v) + " has valence " + std::to_string(vx.incident.size()) +
                              "; resolve it before evolving");
    s.junctions.push_back({static_cast<int>(v), vx.incident, vx.position});
  }
  return s;
}

double stable_dt(const FlowState& state) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : state.net.curves) {
    const auto& x = c.params();
    const auto& p = c.points();
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
      const auto I = static_cast<Eigen::Index>(i);
      const double h = std::min(x(I) - x(I - 1), x(I + 1) - x(I));
      const double speed = (p[i + 1] - p[i - 1]).norm() / (x(I + 1) - x(I - 1));
      best = std::min(best, 0.5 * h * h * speed * speed);
    }
  }
  return best;
}

int repair_parametrization(FlowState& state, double floor) {
  int touched = 0;
  for (auto& c : state.net.curves) {
    const double len = c.length();
    if (min_speed(c) >= floor * len) continue;
    c = c.resampled(c.size());
    ++touched;
  }
  return touched;
}

double herring_residual(const FlowState& state) {
  double worst = 0.0;
  for (const auto& j : state.junctions) {
    Vec2 sum = Vec2::Zero();
    for (const auto& e : j.incident) sum += state.net.outgoing_tangent(e);
    worst = std::max(worst, sum.norm());
  }
  return worst;
}

double coincidence_error(const FlowState& state) {
  double worst = 0.0;
  for (const auto& j : state.junctions)
    for (const auto& e : j.incident) worst = std::max(worst, (state.net.end_position(e) - j.position).norm());
  return worst;
}

FlowState step(const FlowState& state, double dt, const StepOptions& options) {
  if (!(dt > 0.0)) throw PreconditionError("time step must be positive");
  const auto& net = state.net;
  const auto term = terminals(state);
  const std::size_t nc = net.curves.size();

  std::vector<OpenSolve> solves(nc);
  FlowState next;
  next.t = state.t + dt;
  next.junctions = state.junctions;
  next.net.vertices = net.vertices;
  next.net.curves.resize(nc);
  for (std::size_t k = 0; k < nc; ++k) {
    const auto& c = net.curves[k];
    if (min_speed(c) < options.speed_floor * c.length())
      throw DegenerateParametrization("curve " + std::to_string(k) + " speed below floor");
    if (c.closed())
      next.net.curves[k] = step_closed(c, dt);
    else
      solves[k] = solve_open(c, dt);
  }

  const Eigen::Index nj = static_cast<Eigen::Index>(state.junctions.size());
  Eigen::VectorXd X(2 * nj);
  for (Eigen::Index j = 0; j < nj; ++j) X.segment<2>(2 * j) = state.junctions[static_cast<std::size_t>(j)].position;
  auto end_point = [&](const Terminal& t, const Eigen::VectorXd& Y) -> Vec2 {
    if (t.junction != kPinned) return Y.segment<2>(2 * t.junction);
    return net.vertices[static_cast<std::size_t>(t.vertex)].position;
  };

  auto residual = [&](const Eigen::VectorXd& Y, Eigen::MatrixXd* jac) {
    Eigen::VectorXd R = Eigen::VectorXd::Zero(2 * nj);
    if (jac) jac->setZero(2 * nj, 2 * nj);
    for (Eigen::Index j = 0; j < nj; ++j)
      for (const auto& e : state.junctions[static_cast<std::size_t>(j)].incident) {
        const auto k = static_cast<std::size_t>(e.curve);
        const int side = e.end == End::End;
        const Terminal& other = term[k][1 - side];
        const auto& sv = solves[k];
        const Vec2 u = sv.alpha[side] * Vec2(Y.segment<2>(2 * j)) + sv.beta[side] * end_point(other, Y) + sv.c[side];
        const double nu = u.norm();
        if (!(nu > 0.0))
          throw DegenerateParametrization("vanishing end derivative at vertex " +
                                          std::to_string(state.junctions[static_cast<std::size_t>(j)].vertex));
        const Vec2 tau = u / nu;
        R.segment<2>(2 * j) += tau;
        if (jac) {
          const Mat2 Pi = (Mat2::Identity() - tau * tau.transpose()) / nu;
          jac->block<2, 2>(2 * j, 2 * j) += sv.alpha[side] * Pi;
          if (other.junction != kPinned) jac->block<2, 2>(2 * j, 2 * other.junction) += sv.beta[side] * Pi;
        }
      }
    return R;
  };

  if (nj > 0) {
    Eigen::MatrixXd J;
    Eigen::VectorXd R = residual(X, &J);
    double rn = R.lpNorm<Eigen::Infinity>();
    bool stalled = false;
    for (int it = 0; it < options.newton_max && rn > options.newton_tol; ++it) {
      const Eigen::VectorXd dx = J.partialPivLu().solve(-R);
      if (!dx.allFinite()) break;
      double lam = 1.0, rt = rn;
      Eigen::VectorXd Xt = X;
      Eigen::VectorXd Rt;
      for (int ls = 0; ls < 30; ++ls) {
        Xt = X + lam * dx;
        Rt = residual(Xt, nullptr);
        rt = Rt.lpNorm<Eigen::Infinity>();
        if (rt < rn || lam < 1e-6) break;
        lam *= 0.5;
      }
      if (!(rt < rn)) {
        stalled = true;
        break;
      }
      X = Xt;
      R = residual(X, &J);
      rn = R.lpNorm<Eigen::Infinity>();
    }
    // Roundoff floor on tiny edges: a stalled iteration is accepted when the
    // constraint is already far inside the audit tolerance.
    if (!(rn <= options.newton_tol || (stalled && rn <= 1e-9))) {
      Eigen::Index worst = 0;
      for (Eigen::Index j = 0; j < nj; ++j)
        if (R.segment<2>(2 * j).norm() > R.segment<2>(2 * worst).norm()) worst = j;
      throw StepFailure("junction Newton did not converge, residual " + std::to_string(rn),
                        state.junctions[static_cast<std::size_t>(worst)].vertex);
    }
  }

  for (Eigen::Index j = 0; j < nj; ++j) {
    auto& rec = next.junctions[static_cast<std::size_t>(j)];
    rec.position = X.segment<2>(2 * j);
    next.net.vertices[static_cast<std::size_t>(rec.vertex)].position = rec.position;
  }
  for (std::size_t k = 0; k < nc; ++k) {
    const auto& c = net.curves[k];
    if (c.closed()) continue;
    const Vec2 P0 = end_point(term[k][0], X), P1 = end_point(term[k][1], X);
    const auto& sv = solves[k];
    Points q(static_cast<std::size_t>(c.size()));
    for (Eigen::Index i = 0; i < c.size(); ++i) q[static_cast<std::size_t>(i)] = row(sv.base, i) + sv.gs(i) * P0 + sv.ge(i) * P1;
    q.front() = P0;
    q.back() = P1;
    next.net.curves[k] = PolyCurve(c.params(), std::move(q), false);
  }
  return next;
}

// ---------------------------------------------------------------------------

BoundaryOperator boundary_operator(const std::array<Vec2, 3>& derivatives) {
  BoundaryOperator B;
  for (std::size_t j = 0; j < 3; ++j) {
    const double speed = derivatives[j].norm();
    if (!(speed > 0.0) || !std::isfinite(speed)) throw DegenerateParametrization("zero speed at a junction end");
    B.speeds[j] = speed;
    B.tangents[j] = derivatives[j] / speed;
    const Vec2 n = rotate_left(B.tangents[j]);
    B.P += (n * n.transpose()) / speed;
  }
  Eigen::SelfAdjointEigenSolver<Mat2> eig(B.P);
  B.eigenvalues = eig.eigenvalues();
  return B;
}

BoundaryOperator boundary_operator(const FlowState& state, int junction) {
  const auto& rec = state.junctions.at(static_cast<std::size_t>(junction));
  if (rec.incident.size() != 3) throw PreconditionError("boundary operator needs three incident arcs");
  std::array<Vec2, 3> w;
  for (std::size_t j = 0; j < 3; ++j) w[j] = outgoing_derivative(state.net, rec.incident[j]);
  return boundary_operator(w);
}

// ---------------------------------------------------------------------------

double max_curvature(const PolyCurve& c) {
  const auto& p = c.points();
  const std::size_t n = p.size();
  double best = 0.0;
  auto menger = [](const Vec2& a, const Vec2& b, const Vec2& d) {
    const double den = (b - a).norm() * (d - b).norm() * (d - a).norm();
    return den > 0.0 ? 2.0 * std::abs(cross2(Vec2(b - a), Vec2(d - b))) / den : 0.0;
  };
  for (std::size_t i = 1; i + 1 < n; ++i) best = std::max(best, menger(p[i - 1], p[i], p[i + 1]));
  if (c.closed() && n > 3) best = std::max(best, menger(p[n - 2], p[0], p[1]));
  return best;
}

double max_curvature(const Network& net) {
  double best = 0.0;
  for (const auto& c : net.curves) best = std::max(best, max_curvature(c));
  return best;
}

std::optional<TransitionEvent> detect_transition(const FlowState& state, double eps_edge, double kappa_cap) {
  if (!(eps_edge > 0.0)) return std::nullopt;
  const auto& net = state.net;
  const auto term = terminals(state);
  TransitionEvent ev;
  ev.time = state.t;
  for (std::size_t k = 0; k < net.curves.size(); ++k) {
    const auto& c = net.curves[k];
    if (c.closed() || term[k][0].junction == kPinned || term[k][1].junction == kPinned) continue;
    if (term[k][0].junction == term[k][1].junction) continue;
    const double len = c.length();
    if (len >= eps_edge) continue;
    // Curvature on the edge and on the first few samples of its neighbours.
    double kappa = max_curvature(c);
    for (int side = 0; side < 2; ++side)
      for (const auto& e : state.junctions[static_cast<std::size_t>(term[k][side].junction)].incident) {
        if (e.curve == static_cast<int>(k)) continue;
        const auto& nb = net.curves[static_cast<std::size_t>(e.curve)];
        Points head = nb.points();
        if (e.end == End::End) std::reverse(head.begin(), head.end());
        head.resize(std::min<std::size_t>(head.size(), 5));
        if (head.size() >= 3) kappa = std::max(kappa, max_curvature(PolyCurve::uniform(head)));
      }
    if (kappa > kappa_cap)
      throw UnsupportedSingularity("short edge with unbounded curvature", static_cast<int>(k), kappa);
    ev.edges.push_back(static_cast<int>(k));
    ev.curvature = std::max(ev.curvature, kappa);
    ev.edge_length = std::max(ev.edge_length, len);
  }
  if (ev.edges.empty()) return std::nullopt;

  Network cur = net;
  std::vector<int> cmap(net.curves.size()), merged;
  for (std::size_t k = 0; k < cmap.size(); ++k) cmap[k] = static_cast<int>(k);
  for (int e : ev.edges) {
    const int id = cmap[static_cast<std::size_t>(e)];
    if (id < 0) continue;
    Contraction con = contract_edge(cur, id);
    for (auto& m : cmap)
      if (m >= 0) m = con.curve_map[static_cast<std::size_t>(m)];
    for (auto& v : merged) v = con.vertex_map[static_cast<std::size_t>(v)];
    merged.push_back(con.merged);
    cur = std::move(con.net);
  }
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  ev.vertices = merged;
  ev.limit = std::move(cur);
  return ev;
}

// ---------------------------------------------------------------------------

double mesh_size(const Network& net) {
  double len = 0.0;
  long segs = 0;
  for (const auto& c : net.curves) {
    len += c.length();
    segs += c.size() - 1;
  }
  return segs > 0 ? len / static_cast<double>(segs) : 0.0;
}

Trajectory evolve(const FlowState& state, double t_end, const EvolveOptions& options) {
  Trajectory tr;
  FlowState s = state;
  std::vector<double> snaps = options.snapshots;
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;
  while (next_snap < snaps.size() && snaps[next_snap] <= s.t + 1e-14) {
    tr.snapshots.push_back(s);
    ++next_snap;
  }
  const double eps_edge = options.eps_edge >= 0.0 ? options.eps_edge : 3.0 * mesh_size(s.net);
  const double diam = std::max(s.net.diameter(), 1e-12);
  const double kappa_cap =
      options.kappa_cap > 0.0 ? options.kappa_cap : 10.0 * std::max(max_curvature(s.net), 1.0 / diam);
  std::vector<Vec2> pinned;
  for (const auto& v : s.net.vertices) pinned.push_back(v.position);

  tr.times.push_back(s.t);
  tr.lengths.push_back(s.net.total_length());
  double dt = options.dt;
  while (s.t < t_end - 1e-14) {
    if (options.resample_every > 0 && tr.audit.steps > 0 && tr.audit.steps % options.resample_every == 0)
      for (auto& c : s.net.curves) c = c.resampled(c.size());
    tr.audit.resamples += repair_parametrization(s, options.step.speed_floor * 10.0);
    double h = std::min({dt, options.cfl * stable_dt(s), t_end - s.t});
    if (next_snap < snaps.size()) h = std::min(h, snaps[next_snap] - s.t);
    FlowState n;
    try {
      n = step(s, h, options.step);
    } catch (const StepFailure&) {
      ++tr.audit.rejected;
      dt = h / 2;
      if (dt < options.min_dt) throw;
      continue;
    }
    const double L0 = s.net.total_length(), L1 = n.net.total_length();
    tr.audit.max_length_increase = std::max(tr.audit.max_length_increase, L1 - L0);
    tr.audit.max_herring = std::max(tr.audit.max_herring, herring_residual(n));
    tr.audit.max_coincidence = std::max(tr.audit.max_coincidence, coincidence_error(n));
    for (std::size_t v = 0; v < n.net.vertices.size(); ++v)
      if (n.net.vertices[v].kind == VertexKind::Exterior) {
        const Vec2& p = n.net.vertices[v].position;
        bool same = p.x() == pinned[v].x() && p.y() == pinned[v].y();
        for (const auto& e : n.net.vertices[v].incident) {
          const Vec2 q = n.net.end_position(e);
          same = same && q.x() == pinned[v].x() && q.y() == pinned[v].y();
        }
        tr.audit.exterior_pinned = tr.audit.exterior_pinned && same;
      }
    for (std::size_t j = 0; j < n.junctions.size(); ++j)
      tr.audit.min_boundary_eigenvalue =
          std::min(tr.audit.min_boundary_eigenvalue, boundary_operator(n, static_cast<int>(j)).eigenvalues(0));
    ++tr.audit.steps;
    s = std::move(n);
    tr.times.push_back(s.t);
    tr.lengths.push_back(L1);
    if (next_snap < snaps.size() && s.t >= snaps[next_snap] - 1e-14) {
      tr.snapshots.push_back(s);
      ++next_snap;
    }
    if (dt < options.dt) dt = std::min(options.dt, 2.0 * dt);
    if (options.detect) {
      try {
        auto ev = detect_transition(s, eps_edge, kappa_cap);
        if (ev) {
          tr.event = std::move(ev);
          break;
        }
      } catch (const UnsupportedSingularity& e) {
        tr.halted = e.what();
        break;
      }
    }
  }
  tr.final = std::move(s);
  return tr;
}

// ---------------------------------------------------------------------------

Network soliton_network(const SolitonNetwork& sol, double t, double r, int nodes_per_arc) {
  const SolitonPatch patch = truncate_and_scale(sol, t, r);
  const Skeleton sk = skeleton(sol.topology);
  Network net;
  for (const auto& J : patch.junctions) net.vertices.push_back({VertexKind::Interior, J, {}});
  auto leaf_vertex = [&](const Vec2& p, const CurveEnd& e) {
    net.vertices.push_back({VertexKind::Exterior, p, {e}});
  };
  for (std::size_t a = 0; a < patch.arcs.size(); ++a) {
    const auto& arc = sk.arcs[a];
    Points pts = patch.arcs[a].points();
    const int c = static_cast<int>(a);
    switch (arc.kind) {
      case SkeletonArc::Kind::External:
        pts.front() = patch.junctions[static_cast<std::size_t>(arc.a)];
        net.vertices[static_cast<std::size_t>(arc.a)].incident.push_back({c, End::Start});
        break;
      case SkeletonArc::Kind::Internal:
        pts.front() = patch.junctions[static_cast<std::size_t>(arc.a)];
        pts.back() = patch.junctions[static_cast<std::size_t>(arc.b)];
        net.vertices[static_cast<std::size_t>(arc.a)].incident.push_back({c, End::Start});
        net.vertices[static_cast<std::size_t>(arc.b)].incident.push_back({c, End::End});
        break;
      case SkeletonArc::Kind::Geodesic:
        break;
    }
    net.curves.push_back(PolyCurve::uniform(dedupe(pts, 1e-14)).resampled(nodes_per_arc));
    const auto& cc = net.curves.back();
    if (arc.kind == SkeletonArc::Kind::Geodesic) leaf_vertex(cc.front(), {c, End::Start});
    if (arc.kind != SkeletonArc::Kind::Internal) leaf_vertex(cc.back(), {c, End::End});
  }
  return net;
}

FlowState start_from_irregular(const Network& net0, const TopologyChoices& choices, const StartupOptions& opt,
                               StartupReport* report) {
  if (choices.empty()) return make_state(net0, opt.t0);
  if (!(opt.t0 > 0.0) || !(opt.r > 0.0) || !(opt.mesh > 0.0)) throw PreconditionError("startup parameters must be positive");
  const double lam = std::sqrt(2.0 * opt.t0), r0 = 0.6 * opt.r;
  const RegularityReport reg = check_regular(net0, 1e-6);
  for (const auto& [v, topo] : choices) {
    (void)topo;
    bool irregular = false, interior = false;
    for (const auto& vr : reg.vertices)
      if (vr.vertex == v) interior = true, irregular = !vr.regular;
    if (!interior) throw PreconditionError("vertex " + std::to_string(v) + " is not interior");
    if (!irregular) throw PreconditionError("vertex " + std::to_string(v) + " is already regular");
  }

  std::map<int, Fan> fans;
  for (auto& f : extract_fans(net0)) fans[f.vertex] = std::move(f);
  struct Inserted {
    Vec2 center;
    Skeleton sk;
    std::vector<Points> arcs;  // physical, skeleton orientation
    Points junctions;
  };
  std::map<int, Inserted> ins;
  double blend = 0.0;
  for (const auto& [v, topo] : choices) {
    const Fan& fan = fans.at(v);
    SolitonOptions so;
    so.radius = std::max(4.0, 1.05 * r0 / lam);
    so.nodes = opt.soliton_nodes;
    const SolitonNetwork sol = solve_soliton(fan, topo, so);
    SolitonPatch patch;
    try {
      patch = truncate_and_scale(sol, opt.t0, r0);
    } catch (const RangeError& e) {
      throw StartupError(std::string(e.what()) + "; try a smaller t0");
    }
    Inserted I;
    I.center = fan.center;
    I.sk = skeleton(topo);
    for (const auto& a : patch.arcs) {
      Points p = a.points();
      for (auto& q : p) q += fan.center;
      I.arcs.push_back(std::move(p));
    }
    for (const auto& J : patch.junctions) I.junctions.push_back(J + fan.center);

    if (opt.order > 0) {
      std::vector<std::vector<Vec2>> taylor;
      for (std::size_t l = 0; l < fan.ends.size(); ++l) {
        const auto& e = fan.ends[l];
        auto jet = curve_taylor(net0.curves[static_cast<std::size_t>(e.curve)], e.end, opt.order + 1);
        jet[1] = jet[1].norm() * fan.directions[l];
        taylor.push_back(std::move(jet));
      }
      ExpansionOptions eo;
      eo.order = opt.order;
      eo.max_order = std::max(eo.max_order, opt.order);
      eo.s_max = std::max(10.0, 1.2 * r0 / lam);
      const Expansion ex = build_expansion(sol, taylor, {}, eo);
      for (std::size_t k = 0; k < ex.jets.size(); ++k) {
        Points eta = ex.eta(static_cast<int>(k), lam, opt.order);
        Points phys;
        for (const auto& q : eta) phys.push_back(lam * q);
        const auto clipped = clip_to_ball(phys, r0);
        if (clipped.empty()) throw StartupError("expansion arc does not reach the excision ball");
        Points p = clipped.front();
        for (auto& q : p) q += fan.center;
        p.front() = I.junctions[static_cast<std::size_t>(I.sk.arcs[static_cast<std::size_t>(ex.jets[k].arc)].a)];
        I.arcs[static_cast<std::size_t>(ex.jets[k].arc)] = std::move(p);
      }
    }

    // Blend quality: soliton end at 0.6 r against the old curve at 0.6 r.
    for (std::size_t l = 0; l < fan.ends.size(); ++l) {
      const int a = I.sk.leaf_arc[l];
      const auto& arc = I.sk.arcs[static_cast<std::size_t>(a)];
      Points sp = I.arcs[static_cast<std::size_t>(a)];
      if (arc.kind == SkeletonArc::Kind::Geodesic && arc.a == static_cast<int>(l)) sp = reversed_points(sp);
      const std::size_t m = sp.size();
      if (m < 3) throw StartupError("soliton arc too coarse for blending");
      const Vec2 ts = -chord_tangent(sp[m - 1], sp[m - 2], sp[m - 3]);
      const auto& e = fan.ends[l];
      Points cp = net0.curves[static_cast<std::size_t>(e.curve)].points();
      if (e.end == End::End) cp = reversed_points(cp);
      const Points cut = trim_front(cp, I.center, r0, "curve " + std::to_string(e.curve));
      if (cut.size() < 3) throw StartupError("curve too coarse near the excision ball");
      const Vec2 tc = chord_tangent(cut[0], cut[1], cut[2]);
      const double angle = std::acos(std::clamp(ts.dot(tc), -1.0, 1.0));
      const double gap = (sp.back() - cut.front()).norm() / (opt.r - r0);
      blend = std::max({blend, angle, gap});
    }
    ins.emplace(v, std::move(I));
  }
  if (blend > opt.blend_cap)
    throw StartupError("soliton blend mismatch " + std::to_string(blend) + " exceeds cap; try a smaller t0");

  const ResolutionGraph g = assemble_resolution_graph(net0, choices);
  std::vector<int> vertex_of_end(2 * net0.curves.size(), -1);
  for (std::size_t v = 0; v < net0.vertices.size(); ++v)
    for (const auto& e : net0.vertices[v].incident)
      vertex_of_end[static_cast<std::size_t>(2 * e.curve + (e.end == End::End))] = static_cast<int>(v);

  auto node_position = [&](int node) -> Vec2 {
    const auto& nd = g.nodes[static_cast<std::size_t>(node)];
    if (nd.kind == ResolutionNode::Kind::Original) return net0.vertices[static_cast<std::size_t>(nd.vertex)].position;
    return ins.at(nd.vertex).junctions[static_cast<std::size_t>(nd.junction)];
  };

  Network net;
  for (const auto& nd : g.nodes) {
    Vertex vx;
    if (nd.kind == ResolutionNode::Kind::Original) {
      vx.kind = net0.vertices[static_cast<std::size_t>(nd.vertex)].kind;
      vx.position = net0.vertices[static_cast<std::size_t>(nd.vertex)].position;
    } else {
      vx.position = ins.at(nd.vertex).junctions[static_cast<std::size_t>(nd.junction)];
    }
    net.vertices.push_back(vx);
  }

  const double tiny = 1e-12 * std::max(1.0, net0.diameter());
  for (const auto& ch : g.chains) {
    const int cid = static_cast<int>(net.curves.size());
    if (ch.closed) {
      net.curves.push_back(net0.curves[static_cast<std::size_t>(ch.pieces.front().index)]);
      continue;
    }
    Points pts;
    for (const auto& pc : ch.pieces) {
      Points seg;
      if (pc.kind == PieceRef::Kind::Curve) {
        seg = net0.curves[static_cast<std::size_t>(pc.index)].points();
        int vs = vertex_of_end[static_cast<std::size_t>(2 * pc.index)];
        int ve = vertex_of_end[static_cast<std::size_t>(2 * pc.index + 1)];
        if (pc.reversed) {
          seg = reversed_points(seg);
          std::swap(vs, ve);
        }
        const std::string name = "curve " + std::to_string(pc.index);
        if (ins.count(vs)) seg = trim_front(seg, ins.at(vs).center, opt.r, name);
        if (ins.count(ve)) seg = reversed_points(trim_front(reversed_points(seg), ins.at(ve).center, opt.r, name));
        if (seg.size() < 2) throw StartupError(name + " is shorter than the excision annulus");
        if (ins.count(vs) && ins.count(ve) && vs == ve && seg.size() < 3)
          throw StartupError(name + " lies inside the excision ball");
      } else {
        seg = ins.at(pc.vertex).arcs[static_cast<std::size_t>(pc.index)];
        if (pc.reversed) seg = reversed_points(seg);
      }
      if (!pts.empty()) {
        const std::size_t m = pts.size();
        if (m < 3 || seg.size() < 3) throw StartupError("pieces too coarse to blend");
        const Vec2 t0 = -chord_tangent(pts[m - 1], pts[m - 2], pts[m - 3]);
        const Vec2 t1 = chord_tangent(seg[0], seg[1], seg[2]);
        const Points bridge = hermite_bridge(pts.back(), t0, seg.front(), t1, opt.mesh);
        pts.insert(pts.end(), bridge.begin(), bridge.end());
      }
      pts.insert(pts.end(), seg.begin(), seg.end());
    }
    pts = dedupe(pts, tiny);
    pts.front() = node_position(ch.start_node);
    pts.back() = node_position(ch.end_node);
    const PolyCurve raw = PolyCurve::uniform(pts);
    const int nodes = std::max(opt.min_nodes, static_cast<int>(std::ceil(raw.length() / opt.mesh)) + 1);
    net.curves.push_back(raw.resampled(nodes));
    net.vertices[static_cast<std::size_t>(ch.start_node)].incident.push_back({cid, End::Start});
    net.vertices[static_cast<std::size_t>(ch.end_node)].incident.push_back({cid, End::End});
  }

  const PredictedCounts pc = predicted_counts(net0, choices);
  if (pc.curves != static_cast<int>(net.curves.size()))
    throw StartupError("assembled curve count differs from the prediction");
  FlowState s = make_state(net, opt.t0);
  for (const auto& vr : check_regular(net, 0.1).vertices)
    if (vr.valence != 3 || !vr.regular)
      throw StartupError("inserted junction " + std::to_string(vr.vertex) + " is not regular; try a finer mesh");
  if (report) {
    report->blend_error = blend;
    report->resolved.clear();
    for (const auto& [v, topo] : choices) report->resolved.push_back(v);
  }
  return s;
}

FlowState restart(const TransitionEvent& event, const TopologyChoices& choices, const StartupOptions& options) {
  if (choices.empty()) return make_state(event.limit, event.time);
  FlowState s = start_from_irregular(event.limit, choices, options);
  s.t = event.time + options.t0;
  return s;
}

// ---------------------------------------------------------------------------

double geometric_distance(const Network& a, const Network& b, double spacing) {
  if (!(spacing > 0.0)) {
    const double ma = mesh_size(a), mb = mesh_size(b);
    spacing = 0.25 * std::max(std::min(ma > 0 ? ma : mb, mb > 0 ? mb : ma), 1e-12);
  }
  return set_distance(polylines(a), polylines(b), spacing);
}

double geometric_distance(const FlowState& a, const FlowState& b, double spacing) {
  return geometric_distance(a.net, b.net, spacing);
}

SelfSimilarityResult self_similarity_check(const SolitonNetwork& sol, double t0, double t1,
                                           const SelfSimilarityOptions& opt) {
  if (!(t1 > t0) || !(t0 > 0.0)) throw PreconditionError("need 0 < t0 < t1");
  const double lam0 = std::sqrt(2.0 * t0), lam1 = std::sqrt(2.0 * t1);
  const double rho = opt.outer * lam1;
  SolitonOptions so;
  so.radius = std::max(sol.radius, 1.02 * rho / lam0);
  so.nodes = std::max(2000, 10 * opt.nodes_per_arc);
  const SolitonNetwork big = solve_soliton(sol.fan, sol.topology, so);

  const FlowState start = make_state(soliton_network(big, t0, rho, opt.nodes_per_arc), t0);
  EvolveOptions eo;
  eo.dt = opt.dt;
  for (int k = 1; k <= opt.samples; ++k) eo.snapshots.push_back(t0 + (t1 - t0) * k / opt.samples);
  const Trajectory tr = evolve(start, t1, eo);

  std::vector<Points> ref;
  for (const auto& c : truncate_and_scale(big, 0.5, opt.compare).arcs) ref.push_back(c.points());
  SelfSimilarityResult out;
  double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
  for (const auto& p : ref)
    for (const auto& q : p) {
      lo_x = std::min(lo_x, q.x()), hi_x = std::max(hi_x, q.x());
      lo_y = std::min(lo_y, q.y()), hi_y = std::max(hi_y, q.y());
    }
  out.diameter = std::hypot(hi_x - lo_x, hi_y - lo_y);
  const double spacing = 0.25 * mesh_size(start.net) / lam1;
  for (const auto& snap : tr.snapshots) {
    const double inv = 1.0 / std::sqrt(2.0 * snap.t);
    std::vector<Points> got;
    for (const auto& c : snap.net.curves) {
      Points p = c.points();
      for (auto& q : p) q *= inv;
      for (auto& piece : clip_to_ball(p, opt.compare)) got.push_back(std::move(piece));
    }
    const double d = set_distance(got, ref, spacing);
    out.times.push_back(snap.t);
    out.deviations.push_back(d);
    out.deviation = std::max(out.deviation, d);
  }
  return out;
}

}  // namespace netflow
