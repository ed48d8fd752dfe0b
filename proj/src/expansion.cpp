#include "netflow/expansion.hpp"

#include "netflow/stencil.hpp"
#include "fd_detail.hpp"

#include <Eigen/SparseLU>
#include <json.hpp>

#include <ostream>

namespace netflow {

namespace {

// ---- charts ---------------------------------------------------------------

bool in_quarter(const Vec2& phys) { return phys(0) >= 0.0 && phys(1) >= 0.0; }

Vec2 to_physical(Chart c, const Vec2& p) {
  switch (c) {
    case Chart::Physical:
      return p;
    case Chart::Projective:
      if (!(p(0) >= 0.0 && p(1) >= 0.0)) throw DomainError("projective point outside tau, s >= 0");
      return {0.5 * p(0) * p(0), p(1) * p(0)};
    case Chart::Corner:
      if (!(p(0) >= 0.0 && p(1) >= 0.0)) throw DomainError("corner point outside T, y >= 0");
      return {p(0) * p(1) * p(1), p(1)};
    case Chart::Polar:
      if (!(p(0) >= 0.0 && p(1) >= 0.0 && p(1) <= 0.5 * kPi)) throw DomainError("polar point outside the quarter");
      return {p(0) * p(0) * std::sin(p(1)), p(0) * std::cos(p(1))};
  }
  return p;
}

Vec2 from_physical(Chart c, const Vec2& q) {
  if (!in_quarter(q)) throw DomainError("point outside the quarter plane");
  const double t = q(0), x = q(1);
  switch (c) {
    case Chart::Physical:
      return q;
    case Chart::Projective: {
      if (t <= 0.0) throw DomainError("projective chart is singular on t = 0");
      const double tau = std::sqrt(2.0 * t);
      return {tau, x / tau};
    }
    case Chart::Corner:
      if (x <= 0.0) throw DomainError("corner chart is singular on x = 0");
      return {t / (x * x), x};
    case Chart::Polar: {
      const double rho2 = 0.5 * (x * x + std::sqrt(x * x * x * x + 4.0 * t * t));
      if (rho2 <= 0.0) throw DomainError("polar chart is singular at the corner");
      const double rho = std::sqrt(rho2);
      return {rho, std::atan2(t / rho2, x / rho)};
    }
  }
  return q;
}

// d(t, x) / d(chart) at a chart point.
Mat2 physical_jacobian(Chart c, const Vec2& p) {
  Mat2 J;
  switch (c) {
    case Chart::Physical:
      return Mat2::Identity();
    case Chart::Projective:
      J << p(0), 0.0, p(1), p(0);
      return J;
    case Chart::Corner:
      J << p(1) * p(1), 2.0 * p(0) * p(1), 0.0, 1.0;
      return J;
    case Chart::Polar: {
      const double r = p(0), w = p(1);
      J << 2.0 * r * std::sin(w), r * r * std::cos(w), std::cos(w), -r * std::sin(w);
      return J;
    }
  }
  return J;
}

// ---- rational helpers -----------------------------------------------------

Rational exact(double x) {
  if (!std::isfinite(x)) throw PreconditionError("non-finite coefficient");
  return Rational(x);
}

VecPoly<Rational> linear(const std::array<Rational, 2>& a) {
  return {{Polynomial<Rational>::monomial(1, a[0]), Polynomial<Rational>::monomial(1, a[1])}};
}

Vec2 eval(const VecPoly<double>& p, double s) { return {p.comp[0](s), p.comp[1](s)}; }

std::string rational_string(const Rational& q) { return q.get_str(); }

double wrap_pm(double a) { return std::remainder(a, 2.0 * kPi); }

}  // namespace

// ---- charts ---------------------------------------------------------------

Vec2 chart_map(Chart from, Chart to, const Vec2& p) { return from_physical(to, to_physical(from, p)); }

Mat2 chart_jacobian(Chart from, Chart to, const Vec2& p) {
  const Vec2 q = chart_map(from, to, p);
  const Mat2 Jt = physical_jacobian(to, q);
  if (std::abs(Jt.determinant()) < 1e-300) throw DomainError("target chart is singular here");
  return Jt.inverse() * physical_jacobian(from, p);
}

std::vector<FieldSample> lift_field(Chart from, Chart to, const std::vector<FieldSample>& samples) {
  std::vector<FieldSample> out;
  out.reserve(samples.size());
  for (const auto& f : samples) {
    const Mat2 J = chart_jacobian(from, to, f.point);
    FieldSample g;
    g.point = chart_map(from, to, f.point);
    g.value = f.value;
    g.gradient = J.inverse().transpose() * f.gradient;
    out.push_back(g);
  }
  return out;
}

std::function<double(const Vec2&)> lift_function(Chart from, Chart to, std::function<double(const Vec2&)> f) {
  return [from, to, f = std::move(f)](const Vec2& p) { return f(chart_map(to, from, p)); };
}

// ---- lifted residual ------------------------------------------------------

Eigen::MatrixXd lifted_flow_residual_profile(const LiftedField& field) {
  const Eigen::Index nt = field.tau.size(), ns = field.s.size();
  if (nt < 2 || ns < 3) throw PreconditionError("lifted field needs at least 2 tau and 3 s nodes");
  if (static_cast<Eigen::Index>(field.eta.size()) != nt) throw PreconditionError("field rows differ from tau grid");
  for (const auto& row : field.eta)
    if (static_cast<Eigen::Index>(row.size()) != ns) throw PreconditionError("field row differs from s grid");
  const Eigen::Index wt = std::min<Eigen::Index>(5, nt);
  Eigen::MatrixXd res(nt, ns);
  Points d1, d2;
  for (Eigen::Index i = 0; i < nt; ++i) {
    const Eigen::Index lo = std::clamp<Eigen::Index>(i - wt / 2, 0, nt - wt);
    const Eigen::MatrixXd ct = fornberg_weights(field.tau(i), field.tau.segment(lo, wt), 1);
    grid_derivatives(field.s, field.eta[static_cast<std::size_t>(i)], d1, d2, 7);
    for (Eigen::Index k = 0; k < ns; ++k) {
      Vec2 dt = Vec2::Zero();
      for (Eigen::Index m = 0; m < wt; ++m) dt += ct(1, m) * field.eta[static_cast<std::size_t>(lo + m)][static_cast<std::size_t>(k)];
      const Vec2& e1 = d1[static_cast<std::size_t>(k)];
      const double w = e1.squaredNorm();
      if (w < 1e-12) throw DegenerateParametrization("|eta_s| vanishes at s = " + std::to_string(field.s(k)));
      const Vec2& e = field.eta[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      res(i, k) = (field.tau(i) * dt + e - field.s(k) * e1 - d2[static_cast<std::size_t>(k)] / w).norm();
    }
  }
  return res;
}

double lifted_flow_residual(const LiftedField& field) { return lifted_flow_residual_profile(field).maxCoeff(); }

// ---- L_j ------------------------------------------------------------------

Vec2 LjSolution::value(double s) const { return {comp[0].value(s), comp[1].value(s)}; }
Vec2 LjSolution::derivative(double s) const { return {comp[0].derivative(s), comp[1].derivative(s)}; }
double LjSolution::residual() const { return std::max(comp[0].discrete_residual(), comp[1].discrete_residual()); }

LjSolution solve_Lj(int j, const VecPoly<double>& R, const Vec2& a, const Vec2& b,
                    const std::function<Vec2(double)>& decaying, const ModeGrid& grid) {
  if (j < 0) throw PreconditionError("order must be nonnegative");
  LjSolution out;
  out.j = j;
  for (int c = 0; c < 2; ++c) {
    std::function<double(double)> r;
    if (decaying) r = [decaying, c](double s) { return decaying(s)(c); };
    out.comp[static_cast<std::size_t>(c)] = solve_mode(j + 1, R.comp[static_cast<std::size_t>(c)], a(c), b(c), r, grid);
    out.poly.comp[static_cast<std::size_t>(c)] = out.comp[static_cast<std::size_t>(c)].poly;
  }
  return out;
}

VecPoly<Rational> Lj_polynomial(int j, const VecPoly<Rational>& R, const std::array<Rational, 2>& a) {
  const int n = j + 1;
  if (j < 0) throw PreconditionError("order must be nonnegative");
  if (R.degree() > j) throw PreconditionError("right-hand side degree exceeds " + std::to_string(j));
  VecPoly<Rational> P;
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<Rational> k(static_cast<std::size_t>(n) + 3, Rational(0));
    k[static_cast<std::size_t>(n)] = a[c];
    for (int i = n - 1; i >= 0; --i)
      k[static_cast<std::size_t>(i)] =
          (R.comp[c].coeff(i) - Rational((i + 2) * (i + 1)) * k[static_cast<std::size_t>(i) + 2]) / Rational(i - n);
    P.comp[c] = Polynomial<Rational>(std::move(k));
  }
  return P;
}

VecPoly<double> to_double(const VecPoly<Rational>& p) {
  VecPoly<double> out;
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<double> k;
    for (const auto& q : p.comp[c].coeffs()) k.push_back(q.get_d());
    out.comp[c] = Polynomial<double>(std::move(k));
  }
  return out;
}

std::array<Rational, 2> rational_unit(double angle) {
  if (!std::isfinite(angle)) throw PreconditionError("non-finite angle");
  // Stereographic parametrization about the nearest axis, then an exact
  // quarter-turn rotation.
  const double q = std::round(angle / (0.5 * kPi));
  const Rational T = exact(std::tan(0.5 * (angle - q * 0.5 * kPi)));
  const Rational d = 1 + T * T;
  Rational x = (1 - T * T) / d, y = 2 * T / d;
  int turns = static_cast<int>(std::fmod(q, 4.0));
  if (turns < 0) turns += 4;
  for (int i = 0; i < turns; ++i) {
    const Rational nx = -y;
    y = x;
    x = nx;
  }
  return {x, y};
}

Eigen::VectorXd apply_Lj(int j, double h, const Eigen::VectorXd& u) {
  const Eigen::Index n = u.size();
  if (n < 5) throw PreconditionError("apply_Lj needs at least 5 samples");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 2; i + 2 < n; ++i) {
    const double s = static_cast<double>(i) * h;
    const double d2 = (-u(i - 2) + 16 * u(i - 1) - 30 * u(i) + 16 * u(i + 1) - u(i + 2)) / (12 * h * h);
    const double d1 = (u(i - 2) - 8 * u(i - 1) + 8 * u(i + 1) - u(i + 2)) / (12 * h);
    out(i) = d2 + s * d1 - (j + 1) * u(i);
  }
  return out;
}

// ---- junction chart -------------------------------------------------------

ChartVector junction_chart_eval(const JunctionCauchy& c) {
  ChartVector F;
  Vec2 tangents = Vec2::Zero();
  for (int i = 0; i < 3; ++i) {
    const double r = c.w[static_cast<std::size_t>(i)].norm();
    if (!(r > 0.0)) throw DomainError("junction chart needs nonzero endpoint derivatives");
    tangents += c.w[static_cast<std::size_t>(i)] / r;
    F(8 + i) = r;
  }
  F.segment<2>(0) = c.v[0] - c.v[1];
  F.segment<2>(2) = c.v[1] - c.v[2];
  F.segment<2>(4) = tangents;
  F.segment<2>(6) = c.v[0];
  F(11) = std::atan2(c.w[0].y(), c.w[0].x());
  return F;
}

ChartMatrix junction_chart_jacobian(const JunctionCauchy& c) {
  ChartMatrix J = ChartMatrix::Zero();
  const Mat2 I = Mat2::Identity();
  J.block<2, 2>(0, 0) = I;
  J.block<2, 2>(0, 2) = -I;
  J.block<2, 2>(2, 2) = I;
  J.block<2, 2>(2, 4) = -I;
  J.block<2, 2>(6, 0) = I;
  for (int i = 0; i < 3; ++i) {
    const Vec2& w = c.w[static_cast<std::size_t>(i)];
    const double r = w.norm();
    if (!(r > 0.0)) throw DomainError("junction chart needs nonzero endpoint derivatives");
    const Vec2 u = w / r;
    J.block<2, 2>(4, 6 + 2 * i) = (I - u * u.transpose()) / r;
    J.block<1, 2>(8 + i, 6 + 2 * i) = u.transpose();
  }
  J.block<1, 2>(11, 6) = Eigen::RowVector2d(-c.w[0].y(), c.w[0].x()) / c.w[0].squaredNorm();
  return J;
}

namespace {

Eigen::Matrix<double, 12, 1> pack(const JunctionCauchy& c) {
  Eigen::Matrix<double, 12, 1> x;
  for (int i = 0; i < 3; ++i) {
    x.segment<2>(2 * i) = c.v[static_cast<std::size_t>(i)];
    x.segment<2>(6 + 2 * i) = c.w[static_cast<std::size_t>(i)];
  }
  return x;
}

JunctionCauchy unpack(const Eigen::Matrix<double, 12, 1>& x) {
  JunctionCauchy c;
  for (int i = 0; i < 3; ++i) {
    c.v[static_cast<std::size_t>(i)] = x.segment<2>(2 * i);
    c.w[static_cast<std::size_t>(i)] = x.segment<2>(6 + 2 * i);
  }
  return c;
}

ChartVector chart_gap(const JunctionCauchy& c, const ChartVector& target) {
  ChartVector r = junction_chart_eval(c) - target;
  r(11) = wrap_pm(r(11));
  return r;
}

template <typename T>
T horner(const std::vector<T>& c, double tau, T zero) {
  T acc = zero;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * tau + *it;
  return acc;
}

}  // namespace

JunctionCauchy junction_chart_invert(const ChartVector& target, const JunctionCauchy& seed, double tol,
                                     int max_iterations) {
  JunctionCauchy c = seed;
  ChartVector r = chart_gap(c, target);
  double norm = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < max_iterations && norm > tol; ++it) {
    const auto lu = junction_chart_jacobian(c).fullPivLu();
    if (!lu.isInvertible()) throw InversionFailure("junction chart Jacobian is singular", norm);
    const Eigen::Matrix<double, 12, 1> step = lu.solve(-r);
    double lambda = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30 && !moved; ++ls, lambda *= 0.5) {
      const JunctionCauchy trial = unpack(pack(c) + lambda * step);
      ChartVector rt;
      try {
        rt = chart_gap(trial, target);
      } catch (const DomainError&) {
        continue;
      }
      const double nt = rt.lpNorm<Eigen::Infinity>();
      if (std::isfinite(nt) && nt < norm) {
        c = trial;
        r = rt;
        norm = nt;
        moved = true;
      }
    }
    if (!moved) break;
  }
  if (!(norm <= tol)) throw InversionFailure("junction chart inversion did not converge", norm);
  return c;
}

ComplementaryData frozen_complementary(const JunctionCauchy& at0) {
  const ChartVector F = junction_chart_eval(at0);
  ComplementaryData d;
  d.beta = {Vec2(F.segment<2>(6))};
  for (int i = 0; i < 3; ++i) d.zeta[static_cast<std::size_t>(i)] = {F(8 + i)};
  d.theta = {F(11)};
  return d;
}

JunctionCauchy complementary_cauchy(const ComplementaryData& d, double tau, const JunctionCauchy& seed) {
  ChartVector target = ChartVector::Zero();
  target.segment<2>(6) = horner<Vec2>(d.beta, tau, Vec2::Zero());
  for (int i = 0; i < 3; ++i) target(8 + i) = horner<double>(d.zeta[static_cast<std::size_t>(i)], tau, 0.0);
  target(11) = horner<double>(d.theta, tau, 0.0);
  return junction_chart_invert(target, seed);
}

// ---- expansion ------------------------------------------------------------

namespace {

// Solves F0 z'' - 2 F0^2 eta0'' (eta0' . z') + s z' - n z = g with z(0) = z0,
// z(S) = 0 on the profile grid. Returns the max discrete residual.
double solve_corrector(const SolitonProfile& base, int n, const Points& g, const Vec2& z0, Points& z) {
  const Eigen::Index N = base.s.size() - 1;
  const double h = base.step();
  const Eigen::Index m = N - 1;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs(2 * m);
  auto idx = [&](Eigen::Index node, int c) { return 2 * (node - 1) + c; };
  for (Eigen::Index i = 1; i < N; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double s = base.s(i);
    const double F0 = 1.0 / base.d1[k].squaredNorm();
    const Mat2 C = 2.0 * F0 * F0 * base.d2[k] * base.d1[k].transpose();
    const auto st = detail::stencil(i, N, h);
    for (int c = 0; c < 2; ++c) {
      double b = g[k](c);
      for (int q = 0; q < st.width; ++q) {
        const Eigen::Index col = st.first + q;
        for (int e = 0; e < 2; ++e) {
          double coef = -C(c, e) * st.d1[q];
          if (e == c) coef += F0 * st.d2[q] + s * st.d1[q] - (col == i ? n : 0);
          if (coef == 0.0 || col == N) continue;
          if (col == 0)
            b -= coef * z0(e);
          else
            trip.emplace_back(idx(i, c), idx(col, e), coef);
        }
      }
      rhs(idx(i, c)) = b;
    }
  }
  Eigen::SparseMatrix<double> A(2 * m, 2 * m);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SolverFailure("corrector factorization failed", 0.0);
  const Eigen::VectorXd x = lu.solve(rhs);
  const double res = (A * x - rhs).lpNorm<Eigen::Infinity>();
  if (!std::isfinite(res)) throw SolverFailure("corrector produced non-finite values", res);
  z.assign(static_cast<std::size_t>(N + 1), Vec2::Zero());
  z[0] = z0;
  for (Eigen::Index i = 1; i < N; ++i) z[static_cast<std::size_t>(i)] = x.segment<2>(idx(i, 0));
  return res;
}

Points derivative_points(const Points& z, double h) {
  Eigen::VectorXd a(static_cast<Eigen::Index>(z.size())), b(a.size());
  for (std::size_t i = 0; i < z.size(); ++i) a(static_cast<Eigen::Index>(i)) = z[i].x(), b(static_cast<Eigen::Index>(i)) = z[i].y();
  const Eigen::VectorXd da = detail::derivative4(a, h), db = detail::derivative4(b, h);
  Points out;
  for (Eigen::Index i = 0; i < a.size(); ++i) out.emplace_back(da(i), db(i));
  return out;
}

// 1 / |eta'|^2 = sum F_l tau^l at one node from the first derivatives d.
std::vector<double> inverse_speed_series(const std::vector<Vec2>& d, int upto) {
  const int top = static_cast<int>(d.size()) - 1;
  std::vector<double> W(static_cast<std::size_t>(upto) + 1, 0.0), F(static_cast<std::size_t>(upto) + 1, 0.0);
  for (int m = 1; m <= upto; ++m)
    for (int a = 0; a <= m; ++a) {
      if (a > top || m - a > top) continue;
      W[static_cast<std::size_t>(m)] += d[static_cast<std::size_t>(a)].dot(d[static_cast<std::size_t>(m - a)]);
    }
  F[0] = 1.0 / d[0].squaredNorm();
  for (int l = 1; l <= upto; ++l) {
    double acc = 0.0;
    for (int m = 1; m <= l; ++m) acc += W[static_cast<std::size_t>(m)] * F[static_cast<std::size_t>(l - m)];
    F[static_cast<std::size_t>(l)] = -F[0] * acc;
  }
  return F;
}

ExpansionJet build_jet(const SolitonProfile& base, const std::array<Rational, 2>& a0, const std::vector<Vec2>& a,
                       const std::vector<Vec2>& b, int order) {
  ExpansionJet jet;
  jet.base = base;
  const auto K = static_cast<std::size_t>(base.s.size());
  const double h = base.step();
  const Vec2 a0d(a0[0].get_d(), a0[1].get_d());

  jet.poly.push_back(linear(a0));
  jet.a.push_back(a0d);
  jet.b.push_back(base.eta[0]);
  jet.residual.push_back(0.0);
  Points z0(K), dz0(K);
  for (std::size_t k = 0; k < K; ++k) {
    z0[k] = base.eta[k] - base.s(static_cast<Eigen::Index>(k)) * a0d;
    dz0[k] = base.d1[k] - a0d;
  }
  jet.z.push_back(z0);
  jet.dz.push_back(dz0);
  jet.d2z.push_back(base.d2);
  jet.values.push_back(base.eta);
  jet.firsts.push_back(base.d1);
  jet.seconds.push_back(base.d2);

  for (int j = 1; j <= order; ++j) {
    const auto J = static_cast<std::size_t>(j);
    const std::array<Rational, 2> aj{exact(a[J].x()), exact(a[J].y())};
    const VecPoly<Rational> Qx = assemble_Q<Rational>(j, jet.poly);
    const VecPoly<Rational> P = Lj_polynomial(j, VecPoly<Rational>{} - Qx, aj);
    jet.poly.push_back(P);
    jet.a.push_back(Vec2(aj[0].get_d(), aj[1].get_d()));
    jet.b.push_back(b[J]);
    const VecPoly<double> Pd = to_double(P), P1 = Pd.derivative(), P2 = Pd.derivative(2), Q = to_double(Qx);

    Points g(K);
    std::vector<Vec2> d(J + 1);
    for (std::size_t k = 0; k < K; ++k) {
      const double s = base.s(static_cast<Eigen::Index>(k));
      for (std::size_t i = 0; i < J; ++i) d[i] = jet.firsts[i][k];
      d[J] = Vec2::Zero();  // F_j without its eta_j part
      const std::vector<double> F = inverse_speed_series(d, j);
      Vec2 rest = base.d2[k] * F[J];
      for (std::size_t i = 1; i < J; ++i) rest += jet.seconds[i][k] * F[J - i];
      const double F0 = F[0];
      g[k] = -(rest - eval(Q, s)) - (F0 - 1.0) * eval(P2, s) +
             2.0 * F0 * F0 * base.d2[k] * base.d1[k].dot(eval(P1, s));
    }
    Points z;
    const Vec2 zb = b[J] - eval(Pd, 0.0);
    jet.residual.push_back(solve_corrector(base, j + 1, g, zb, z));
    const Points dz = derivative_points(z, h);
    Points d2z(K), val(K), first(K), second(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double s = base.s(static_cast<Eigen::Index>(k));
      const double F0 = 1.0 / base.d1[k].squaredNorm();
      d2z[k] = (g[k] + 2.0 * F0 * F0 * base.d2[k] * base.d1[k].dot(dz[k]) - s * dz[k] + (j + 1) * z[k]) / F0;
      val[k] = eval(Pd, s) + z[k];
      first[k] = eval(P1, s) + dz[k];
      second[k] = eval(P2, s) + d2z[k];
    }
    jet.z.push_back(std::move(z));
    jet.dz.push_back(dz);
    jet.d2z.push_back(d2z);
    jet.values.push_back(std::move(val));
    jet.firsts.push_back(std::move(first));
    jet.seconds.push_back(std::move(second));
  }
  return jet;
}

}  // namespace

Points Expansion::eta(int jet, double tau, int order) const {
  const auto& J = jets.at(static_cast<std::size_t>(jet));
  const int top = order < 0 ? J.order() : std::min(order, J.order());
  Points out(static_cast<std::size_t>(J.nodes()), Vec2::Zero());
  for (int j = 0; j <= top; ++j) {
    const double c = borel(j * j * tau) * std::pow(tau, j);
    for (Eigen::Index k = 0; k < J.nodes(); ++k) out[static_cast<std::size_t>(k)] += c * J.value(j, k);
  }
  return out;
}

double Expansion::defect(double tau, double s_max, int order) const {
  if (!(tau > 0.0)) throw DomainError("defect needs tau > 0");
  double worst = 0.0;
  for (const auto& J : jets) {
    const int top = order < 0 ? J.order() : std::min(order, J.order());
    for (Eigen::Index k = 0; k < J.nodes() && J.base.s(k) <= s_max; ++k) {
      Vec2 e = Vec2::Zero(), e1 = Vec2::Zero(), e2 = Vec2::Zero(), et = Vec2::Zero();
      for (int j = 0; j <= top; ++j) {
        const double r = j * j * tau, p = std::pow(tau, j);
        const double c = borel(r) * p;
        const double tc = j * c + r * borel(r, 1) * p;
        e += c * J.value(j, k);
        e1 += c * J.d1(j, k);
        e2 += c * J.d2(j, k);
        et += tc * J.value(j, k);
      }
      const double w = e1.squaredNorm();
      if (w < 1e-12) throw DegenerateParametrization("|eta_s| vanishes in the expansion");
      worst = std::max(worst, (et + e - J.base.s(k) * e1 - e2 / w).norm());
    }
  }
  return worst;
}

LiftedField Expansion::field(int jet, const Eigen::VectorXd& tau, double s_max, int order) const {
  const auto& J = jets.at(static_cast<std::size_t>(jet));
  Eigen::Index ns = 0;
  while (ns < J.nodes() && J.base.s(ns) <= s_max) ++ns;
  LiftedField f;
  f.tau = tau;
  f.s = J.base.s.head(ns);
  for (Eigen::Index i = 0; i < tau.size(); ++i) {
    Points row = eta(jet, tau(i), order);
    row.resize(static_cast<std::size_t>(ns));
    f.eta.push_back(std::move(row));
  }
  return f;
}

Expansion build_expansion(const SolitonNetwork& sol, const std::vector<std::vector<Vec2>>& taylor,
                          const std::vector<ComplementaryData>& junctions, const ExpansionOptions& opt) {
  if (opt.order < 0 || opt.order > opt.max_order)
    throw PreconditionError("expansion order must lie in [0, " + std::to_string(opt.max_order) + "]");
  const int k = sol.fan.valence();
  if (static_cast<int>(taylor.size()) != k) throw PreconditionError("one Taylor jet per fan direction is required");
  if (!junctions.empty() && junctions.size() != sol.junctions.size())
    throw PreconditionError("complementary data must be given for every junction");
  const Skeleton sk = skeleton(sol.topology);

  Expansion out;
  out.center = sol.fan.center;
  out.borel = opt.borel;
  for (const auto& jn : sol.junctions) {
    JunctionCauchy c;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& [arc, end] = jn.incident[i];
      const auto& A = sol.arcs[static_cast<std::size_t>(arc)];
      c.v[i] = jn.position;
      c.w[i] = end == End::Start ? A.deta.front() : Vec2(-A.deta.back());
    }
    out.junction_data.push_back(c);
  }

  for (int leaf = 0; leaf < k; ++leaf) {
    const int e = sk.leaf_arc[static_cast<std::size_t>(leaf)];
    const auto& sa = sk.arcs[static_cast<std::size_t>(e)];
    if (sa.kind != SkeletonArc::Kind::External) continue;
    const auto& jet_in = taylor[static_cast<std::size_t>(leaf)];
    if (static_cast<int>(jet_in.size()) < opt.order + 2)
      throw PreconditionError("Taylor jet of direction " + std::to_string(leaf) + " is too short");
    const Vec2 dir = sol.fan.directions[static_cast<std::size_t>(leaf)].normalized();
    const double c = jet_in[1].norm();
    if (!(c > 0.0) || (jet_in[1] / c - dir).norm() > 1e-6)
      throw PreconditionError("initial tangent of direction " + std::to_string(leaf) + " disagrees with the fan");
    std::vector<Vec2> a(static_cast<std::size_t>(opt.order) + 1), b(a.size(), Vec2::Zero());
    for (int j = 0; j <= opt.order; ++j) a[static_cast<std::size_t>(j)] = jet_in[static_cast<std::size_t>(j) + 1] / std::pow(c, j + 1);
    if (!junctions.empty()) {
      const auto& beta = junctions[static_cast<std::size_t>(sa.a)].beta;
      for (std::size_t j = 1; j < b.size() && j < beta.size(); ++j) b[j] = beta[j];
    }

    const auto& arc = sol.arcs[static_cast<std::size_t>(e)];
    const SolitonProfile base = soliton_profile(arc.eta.front(), std::atan2(arc.deta.front().y(), arc.deta.front().x()),
                                                opt.s_max, opt.intervals);
    const auto a0 = rational_unit(std::atan2(dir.y(), dir.x()));
    if ((base.d1.back() - Vec2(a0[0].get_d(), a0[1].get_d())).norm() > 1e-3)
      throw SolverFailure("soliton arc does not approach its fan direction", (base.d1.back() - dir).norm());
    ExpansionJet jet = build_jet(base, a0, a, b, opt.order);
    jet.arc = e;
    jet.junction = sa.a;
    out.jets.push_back(std::move(jet));
  }
  return out;
}

std::vector<Vec2> curve_taylor(const PolyCurve& curve, End end, int order, int samples) {
  if (order < 0) throw PreconditionError("Taylor order must be nonnegative");
  const PolyCurve c = end == End::Start ? curve : curve.reversed();
  const int n = samples > 0 ? samples : std::max(3 * (order + 1), c.size() / 4);
  if (n < order + 1 || n > c.size()) throw InsufficientData("not enough samples for the Taylor fit");
  const double xmax = c.params()(n - 1);
  Eigen::MatrixXd V(n, order + 1);
  Eigen::MatrixXd Y(n, 2);
  for (int i = 0; i < n; ++i) {
    const double u = c.params()(i) / xmax;
    for (int m = 0; m <= order; ++m) V(i, m) = std::pow(u, m);
    Y.row(i) = c.points()[static_cast<std::size_t>(i)].transpose();
  }
  const Eigen::MatrixXd coef = V.colPivHouseholderQr().solve(Y);
  std::vector<Vec2> out;
  for (int m = 0; m <= order; ++m) out.emplace_back(coef.row(m).transpose() / std::pow(xmax, m));
  return out;
}

DefectOrder defect_order(const Expansion& e, const std::vector<double>& taus, double s_max, int order) {
  if (taus.size() < 2) throw PreconditionError("defect order needs at least two tau values");
  DefectOrder d;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  bool vanishing = true;
  for (double t : taus) {
    const double r = e.defect(t, s_max, order);
    d.tau.push_back(t);
    d.residual.push_back(r);
    vanishing = vanishing && r == 0.0;
    const double x = std::log(t), y = std::log(std::max(r, 1e-300));
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double n = static_cast<double>(taus.size());
  d.order = vanishing ? std::numeric_limits<double>::infinity() : (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return d;
}

std::string jet_dump(const Expansion& e) {
  using nlohmann::json;
  json root;
  root["center"] = {e.center.x(), e.center.y()};
  root["borel_cutoff"] = {e.borel.a(), e.borel.b()};
  root["jets"] = json::array();
  for (const auto& J : e.jets) {
    json jj;
    jj["arc"] = J.arc;
    jj["junction"] = J.junction;
    const Eigen::Index stride = std::max<Eigen::Index>(1, J.nodes() / 200);
    json s = json::array();
    for (Eigen::Index k = 0; k < J.nodes(); k += stride) s.push_back(J.base.s(k));
    jj["s"] = s;
    jj["orders"] = json::array();
    for (int j = 0; j <= J.order(); ++j) {
      const auto u = static_cast<std::size_t>(j);
      json o;
      o["j"] = j;
      o["a"] = {J.a[u].x(), J.a[u].y()};
      o["b"] = {J.b[u].x(), J.b[u].y()};
      for (std::size_t c = 0; c < 2; ++c) {
        json coeffs = json::array();
        for (const auto& q : J.poly[u].comp[c].coeffs()) coeffs.push_back(rational_string(q));
        o["poly"][c == 0 ? "x" : "y"] = coeffs;
      }
      o["corrector_residual"] = J.residual[u];
      json z = json::array();
      for (Eigen::Index k = 0; k < J.nodes(); k += stride)
        z.push_back({J.z[u][static_cast<std::size_t>(k)].x(), J.z[u][static_cast<std::size_t>(k)].y()});
      o["corrector"] = z;
      jj["orders"].push_back(o);
    }
    root["jets"].push_back(jj);
  }
  return root.dump(2);
}

void write_defect_csv(std::ostream& out, const DefectOrder& d) {
  out << "tau,residual\n";
  out.precision(17);
  for (std::size_t i = 0; i < d.tau.size(); ++i) out << d.tau[i] << ',' << d.residual[i] << '\n';
}

}  // namespace netflow
