#include "netflow/expansion.hpp"
#include "netflow/fixtures.hpp"

#include <doctest.h>

#include <json.hpp>

#include <random>
#include <sstream>

using namespace netflow;

namespace {

using RPoly = Polynomial<Rational>;
using RVec = VecPoly<Rational>;

const Vec2 kTauS(0.3, 1.7);

Vec2 sample_point(Chart c) {
  switch (c) {
    case Chart::Physical:
      return {0.37, 0.81};
    case Chart::Projective:
      return {0.6, 1.3};
    case Chart::Corner:
      return {0.45, 0.7};
    case Chart::Polar:
      return {0.9, 0.6};
  }
  return {};
}

const Chart kCharts[] = {Chart::Physical, Chart::Projective, Chart::Corner, Chart::Polar};

// Brute force: coefficient of tau^j in eta'' / |eta'|^2, with eta = sum tau^i
// eta_i for i < j, by multiplying truncated bivariate series.
RVec series_oracle(int j, const std::vector<RVec>& eta) {
  using Series = std::vector<RPoly>;  // index = tau power
  using VSeries = std::vector<RVec>;
  const auto n = static_cast<std::size_t>(j) + 1;
  VSeries d(n), dd(n);
  for (std::size_t i = 0; i < eta.size() && i < n; ++i) {
    d[i] = eta[i].derivative();
    dd[i] = eta[i].derivative(2);
  }
  Series w1(n);  // |eta'|^2 - 1
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; a + b < n; ++b) w1[a + b] += dot(d[a], d[b]);
  w1[0] -= RPoly::constant(1);
  auto mul = [&](const Series& x, const Series& y) {
    Series r(n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; a + b < n; ++b) r[a + b] += x[a] * y[b];
    return r;
  };
  Series inv(n), power(n);
  power[0] = RPoly::constant(1);
  for (int p = 0; p <= j; ++p) {
    for (std::size_t k = 0; k < n; ++k) inv[k] += (p % 2 == 0 ? power[k] : -power[k]);
    power = mul(power, w1);
  }
  RVec out;
  for (std::size_t a = 0; a < n; ++a) out = out + inv[static_cast<std::size_t>(j) - a] * dd[a];
  return out;
}

Rational small_rational(std::mt19937& g) {
  std::uniform_int_distribution<int> num(-9, 9), den(1, 7);
  Rational q(num(g), den(g));
  q.canonicalize();
  return q;
}

std::vector<RVec> random_jets(int j, std::mt19937& g) {
  std::vector<RVec> eta;
  eta.push_back({{RPoly::monomial(1, Rational(3, 5)), RPoly::monomial(1, Rational(4, 5))}});
  for (int i = 1; i < j; ++i) {
    RVec p;
    for (auto& c : p.comp) {
      std::vector<Rational> k;
      for (int m = 0; m <= i + 1; ++m) k.push_back(small_rational(g));
      c = RPoly(k);
    }
    eta.push_back(p);
  }
  return eta;
}

Fan cross_fan() { return Fan::from_angles({0.0, kPi / 2, kPi, 3 * kPi / 2}); }

std::vector<std::vector<Vec2>> star_jets(const Network& net, int order) {
  std::vector<std::vector<Vec2>> t;
  for (const auto& c : net.curves) t.push_back(curve_taylor(c, End::Start, order));
  return t;
}

const std::vector<double> kTaus{0.04, 0.02, 0.01, 0.005};

}  // namespace

TEST_CASE("chart round trips") {
  for (Chart a : kCharts)
    for (Chart b : kCharts) {
      const Vec2 p = sample_point(a);
      const Vec2 back = chart_map(b, a, chart_map(a, b, p));
      CHECK((back - p).norm() <= 1e-12);
      const Mat2 J = chart_jacobian(a, b, p);
      CHECK(std::abs(J.determinant()) > 1e-8);
      CHECK((chart_jacobian(b, a, chart_map(a, b, p)) * J - Mat2::Identity()).norm() <= 1e-12);
    }
  CHECK_THROWS_AS(chart_map(Chart::Physical, Chart::Projective, Vec2(0.0, 0.5)), DomainError);
  CHECK_THROWS_AS(chart_map(Chart::Physical, Chart::Corner, Vec2(0.5, 0.0)), DomainError);
  CHECK_THROWS_AS(chart_map(Chart::Physical, Chart::Polar, Vec2(0.0, 0.0)), DomainError);
  CHECK_THROWS_AS(chart_map(Chart::Physical, Chart::Physical, Vec2(-0.1, 0.5)), DomainError);
}

TEST_CASE("chart Jacobian matches differences") {
  for (Chart a : kCharts)
    for (Chart b : kCharts) {
      const Vec2 p = sample_point(a);
      const Mat2 J = chart_jacobian(a, b, p);
      for (int c = 0; c < 2; ++c) {
        const double h = 1e-6;
        Vec2 e = Vec2::Zero();
        e(c) = h;
        const Vec2 fd = (chart_map(a, b, p + e) - chart_map(a, b, p - e)) / (2 * h);
        CHECK((fd - J.col(c)).norm() <= 1e-7);
      }
    }
}

TEST_CASE("lifting fields") {
  // constants stay constant
  const auto one = lift_function(Chart::Physical, Chart::Polar, [](const Vec2&) { return 1.0; });
  CHECK(one(Vec2(0.7, 0.3)) == 1.0);

  // u = x is s tau in the projective chart, with gradient (s, tau)
  const auto u = lift_function(Chart::Physical, Chart::Projective, [](const Vec2& p) { return p(1); });
  CHECK(u(kTauS) == doctest::Approx(kTauS(0) * kTauS(1)).epsilon(1e-14));
  std::vector<FieldSample> samples;
  for (double t : {0.1, 0.4, 1.3})
    for (double x : {0.2, 0.9}) samples.push_back({Vec2(t, x), x, Vec2(0.0, 1.0)});
  const auto lifted = lift_field(Chart::Physical, Chart::Projective, samples);
  for (const auto& f : lifted) {
    CHECK(f.value == doctest::Approx(f.point(0) * f.point(1)).epsilon(1e-14));
    CHECK((f.gradient - Vec2(f.point(1), f.point(0))).norm() <= 1e-13);
  }
  const auto back = lift_field(Chart::Projective, Chart::Physical, lifted);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK((back[i].point - samples[i].point).norm() <= 1e-13);
    CHECK((back[i].gradient - samples[i].gradient).norm() <= 1e-13);
  }
  CHECK_THROWS_AS(lift_field(Chart::Physical, Chart::Corner, {FieldSample{Vec2(0.2, 0.0), 0.0, Vec2::Zero()}}),
                  DomainError);
}

TEST_CASE("heat operator in projective coordinates") {
  // u = exp(-t) sin x solves the heat equation; the lifted operator
  // tau^-2 (tau d_tau - s d_s - d_s^2) must vanish to difference order.
  const auto U = lift_function(Chart::Physical, Chart::Projective,
                               [](const Vec2& p) { return std::exp(-p(0)) * std::sin(p(1)); });
  auto lifted_heat = [&](double h) {
    double worst = 0.0;
    for (double tau : {0.5, 0.8, 1.1})
      for (double s : {0.3, 1.0, 2.2}) {
        const double ut = (U({tau + h, s}) - U({tau - h, s})) / (2 * h);
        const double us = (U({tau, s + h}) - U({tau, s - h})) / (2 * h);
        const double uss = (U({tau, s + h}) - 2 * U({tau, s}) + U({tau, s - h})) / (h * h);
        worst = std::max(worst, std::abs((tau * ut - s * us - uss) / (tau * tau)));
      }
    return worst;
  };
  const double e1 = lifted_heat(1e-2), e2 = lifted_heat(5e-3);
  CHECK(e1 < 1e-3);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("lifted flow residual") {
  LiftedField f;
  f.tau = Eigen::VectorXd::LinSpaced(5, 0.1, 0.3);
  f.s = Eigen::VectorXd::LinSpaced(41, 0.0, 4.0);
  const Vec2 a = unit_at(0.4);
  for (Eigen::Index i = 0; i < f.tau.size(); ++i) {
    Points row;
    for (Eigen::Index k = 0; k < f.s.size(); ++k) row.push_back(f.s(k) * a);
    f.eta.push_back(row);
  }
  CHECK(lifted_flow_residual(f) <= 1e-11);

  // a tau-proportional perturbation produces a residual linear in its size
  auto perturbed = [&](double eps) {
    LiftedField g = f;
    for (Eigen::Index i = 0; i < g.tau.size(); ++i)
      for (Eigen::Index k = 0; k < g.s.size(); ++k)
        g.eta[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] +=
            eps * g.tau(i) * Vec2(std::sin(3 * g.s(k)), std::cos(2 * g.s(k)));
    return lifted_flow_residual(g);
  };
  const double r1 = perturbed(1e-4), r2 = perturbed(2e-4);
  CHECK(r1 > 1e-7);
  CHECK(r2 / r1 == doctest::Approx(2.0).epsilon(1e-3));

  // exact soliton arc of the cross, tau independent
  const auto sol = solve_soliton(cross_fan(), TopologyDescriptor::parse("12|34", 4));
  ExpansionOptions o;
  o.order = 0;
  const auto e = build_expansion(sol, star_jets(cross_network(201), 1), {}, o);
  for (std::size_t j = 0; j < e.jets.size(); ++j)
    CHECK(lifted_flow_residual(e.field(static_cast<int>(j), f.tau, 3.0)) <= 1e-8);

  LiftedField bad = f;
  for (auto& row : bad.eta)
    for (auto& p : row) p = Vec2(1.0, 2.0);
  CHECK_THROWS_AS(lifted_flow_residual(bad), DegenerateParametrization);
}

TEST_CASE("assemble_Q against the series oracle") {
  std::mt19937 g(7);
  for (int trial = 0; trial < 4; ++trial)
    for (int j = 1; j <= 5; ++j) {
      const auto eta = random_jets(j, g);
      const RVec Q = assemble_Q<Rational>(j, eta);
      CHECK(Q == series_oracle(j, eta));
      CHECK(Q.degree() <= j - 1);
    }
  const auto eta = random_jets(3, g);
  CHECK(assemble_Q<Rational>(1, eta).degree() == -1);
  const RVec d1 = eta[1].derivative();
  const RPoly cross = dot(eta[0].derivative(), d1) * Rational(-2);
  CHECK(assemble_Q<Rational>(2, eta) == cross * eta[1].derivative(2));

  CHECK_THROWS_AS(assemble_Q<Rational>(3, std::vector<RVec>(eta.begin(), eta.begin() + 2)), PreconditionError);
  std::vector<RVec> skew = eta;
  skew[0] = {{RPoly::monomial(1, Rational(1)), RPoly::monomial(1, Rational(1))}};
  CHECK_THROWS_AS(assemble_Q<Rational>(2, skew), PreconditionError);
}

TEST_CASE("solve_Lj") {
  const Vec2 a(1.0, -2.0), b(0.5, 0.25);
  const LjSolution u = solve_Lj(1, {}, a, b);
  for (int c = 0; c < 2; ++c) {
    const auto& p = u.poly.comp[static_cast<std::size_t>(c)];
    CHECK(p.degree() == 2);
    CHECK(p.coeff(2) == a(c));
    CHECK(p.coeff(1) == 0.0);
    CHECK(p.coeff(0) == a(c));
  }
  CHECK((u.value(0.0) - b).norm() <= 1e-12);
  CHECK(u.residual() <= 1e-10);
  const LjSolution again = solve_Lj(1, {}, a, b);
  for (double s : {0.0, 0.7, 2.5, 6.0}) CHECK((u.value(s) - again.value(s)).norm() <= 1e-12);

  // data with a decaying part
  VecPoly<double> R{{Polynomial<double>({0.0, 1.0, 0.0}), Polynomial<double>({2.0})}};
  const auto decay = [](double s) { return Vec2(std::exp(-s * s), s * std::exp(-s * s)); };
  const LjSolution w = solve_Lj(2, R, Vec2(0.3, 0.1), Vec2(-1.0, 1.0), decay);
  CHECK(w.residual() <= 1e-10);
  CHECK((w.value(0.0) - Vec2(-1.0, 1.0)).norm() <= 1e-12);
  CHECK(degree_ok(2, w.poly));

  // exact polynomial part satisfies L_j P = R identically
  std::mt19937 g(3);
  for (int j = 1; j <= 5; ++j) {
    RVec Rr;
    for (auto& c : Rr.comp) {
      std::vector<Rational> k;
      for (int m = 0; m < j; ++m) k.push_back(small_rational(g));
      c = RPoly(k);
    }
    const std::array<Rational, 2> lead{small_rational(g), Rational(1, 3)};
    const RVec P = Lj_polynomial(j, Rr, lead);
    const RVec LP = P.derivative(2) + RPoly::monomial(1, Rational(1)) * P.derivative() - Rational(j + 1) * P;
    CHECK(LP == Rr);
    CHECK(degree_ok(j, P));
  }
  CHECK_THROWS_AS(Lj_polynomial(1, {{RPoly::monomial(2, Rational(1)), RPoly()}}, {Rational(1), Rational(0)}),
                  PreconditionError);
}

TEST_CASE("intertwining of the L_j") {
  auto u = [](double s) { return std::sin(1.3 * s) + 0.4 * std::exp(-0.5 * s * s) + 0.1 * s * s * s; };
  auto du = [](double s) { return 1.3 * std::cos(1.3 * s) - 0.4 * s * std::exp(-0.5 * s * s) + 0.3 * s * s; };
  auto mismatch = [&](int j, double h) {
    const int n = static_cast<int>(std::round(4.0 / h)) + 1;
    Eigen::VectorXd U(n), DU(n);
    for (int i = 0; i < n; ++i) U(i) = u(i * h), DU(i) = du(i * h);
    const Eigen::VectorXd LU = apply_Lj(j, h, U), LDU = apply_Lj(j - 1, h, DU);
    double worst = 0.0;
    for (int i = 4; i + 4 < n; ++i) {
      const double d = (LU(i - 2) - 8 * LU(i - 1) + 8 * LU(i + 1) - LU(i + 2)) / (12 * h);
      worst = std::max(worst, std::abs(d - LDU(i)));
    }
    return worst;
  };
  for (int j = 1; j <= 4; ++j) {
    const double e1 = mismatch(j, 0.08), e2 = mismatch(j, 0.04);
    CHECK(e1 < 1e-3);
    CHECK(e1 / e2 > 12.0);
  }
}

TEST_CASE("rational unit vectors") {
  for (double ang : {0.0, 0.3, kPi / 2, 2.0, kPi, -0.7, 4.0, 3 * kPi / 2, 6.2}) {
    const auto u = rational_unit(ang);
    CHECK(u[0] * u[0] + u[1] * u[1] == Rational(1));
    CHECK(std::abs(u[0].get_d() - std::cos(ang)) <= 1e-15);
    CHECK(std::abs(u[1].get_d() - std::sin(ang)) <= 1e-15);
  }
}

TEST_CASE("junction chart") {
  JunctionCauchy triod;
  for (std::size_t i = 0; i < 3; ++i) {
    triod.v[i] = Vec2::Zero();
    triod.w[i] = unit_at(0.2 + 2 * kPi * static_cast<double>(i) / 3);
  }
  const ChartVector F = junction_chart_eval(triod);
  CHECK(F.head<8>().norm() <= 1e-15);
  CHECK(F.segment<3>(8).isApprox(Eigen::Vector3d::Ones(), 1e-15));
  CHECK(F(11) == doctest::Approx(0.2).epsilon(1e-15));

  std::mt19937 g(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int nonzero = 0;
  double worst_trip = 0.0, worst_det = 0.0, worst_jac = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    JunctionCauchy c;
    double ph[3], r[3];
    do {
      for (int i = 0; i < 3; ++i) ph[i] = 2 * kPi * U(g);
    } while (std::abs(std::sin(ph[2] - ph[1])) < 0.05);
    for (std::size_t i = 0; i < 3; ++i) {
      r[i] = 0.5 + 1.5 * U(g);
      c.v[i] = Vec2(U(g) - 0.5, U(g) - 0.5);
      c.w[i] = r[i] * unit_at(ph[i]);
    }
    const ChartMatrix J = junction_chart_jacobian(c);
    const double det = J.determinant();
    if (std::abs(det) > 1e-8) ++nonzero;
    worst_det = std::max(worst_det, std::abs(det + std::sin(ph[2] - ph[1]) / (r[0] * r[1] * r[2])));
    if (trial < 50) {
      ChartMatrix fd;
      JunctionCauchy p = c;
      for (int k = 0; k < 12; ++k) {
        const double h = 1e-6;
        auto& slot = k < 6 ? p.v[static_cast<std::size_t>(k / 2)](k % 2) : p.w[static_cast<std::size_t>((k - 6) / 2)](k % 2);
        const double keep = slot;
        slot = keep + h;
        const ChartVector fp = junction_chart_eval(p);
        slot = keep - h;
        ChartVector diff = fp - junction_chart_eval(p);
        diff(11) = std::remainder(diff(11), 2 * kPi);
        slot = keep;
        fd.col(k) = diff / (2 * h);
      }
      worst_jac = std::max(worst_jac, (fd - J).lpNorm<Eigen::Infinity>());
    }
    JunctionCauchy seed = c;
    for (auto& w : seed.w) w += 0.02 * Vec2(U(g) - 0.5, U(g) - 0.5);
    for (auto& v : seed.v) v += 0.02 * Vec2(U(g) - 0.5, U(g) - 0.5);
    const JunctionCauchy back = junction_chart_invert(junction_chart_eval(c), seed);
    for (std::size_t i = 0; i < 3; ++i)
      worst_trip = std::max({worst_trip, (back.v[i] - c.v[i]).norm(), (back.w[i] - c.w[i]).norm()});
  }
  CHECK(nonzero == 1000);
  CHECK(worst_det <= 1e-12);
  CHECK(worst_jac <= 1e-7);
  CHECK(worst_trip <= 1e-10);

  JunctionCauchy dead = triod;
  dead.w[1] = Vec2::Zero();
  CHECK_THROWS_AS(junction_chart_eval(dead), DomainError);
  ChartVector far = F;
  far(8) = -1.0;  // no Cauchy data has negative length
  CHECK_THROWS_AS(junction_chart_invert(far, triod), InversionFailure);

  const ComplementaryData frozen = frozen_complementary(triod);
  const JunctionCauchy again = complementary_cauchy(frozen, 0.3, triod);
  for (std::size_t i = 0; i < 3; ++i) CHECK((again.w[i] - triod.w[i]).norm() <= 1e-12);
}

TEST_CASE("curve Taylor coefficients") {
  const Network net = cross_network(201, 0.3, 1.5);
  const auto t = curve_taylor(net.curves[1], End::Start, 4);
  CHECK(t[0].norm() <= 1e-12);
  CHECK((t[1] - Vec2(0.0, 1.5)).norm() <= 1e-10);
  CHECK((t[2] - Vec2(-0.45, 0.0)).norm() <= 1e-9);
  CHECK(t[3].norm() <= 1e-8);
  const auto r = curve_taylor(net.curves[1], End::End, 2);
  CHECK((r[0] - net.curves[1].back()).norm() <= 1e-12);
  CHECK_THROWS_AS(curve_taylor(net.curves[1], End::Start, 4, 3), InsufficientData);
}

TEST_CASE("straight triod has no corrections") {
  const Fan fan = Fan::from_angles({0.0, 2 * kPi / 3, 4 * kPi / 3});
  const auto sol = solve_soliton(fan, TopologyDescriptor::parse("123", 3));
  std::vector<std::vector<Vec2>> jets;
  for (const auto& d : fan.directions) jets.push_back({Vec2::Zero(), d, Vec2::Zero(), Vec2::Zero(), Vec2::Zero()});
  const auto e = build_expansion(sol, jets);
  REQUIRE(e.jets.size() == 3);
  for (const auto& J : e.jets)
    for (int j = 1; j <= J.order(); ++j) {
      CHECK(J.poly[static_cast<std::size_t>(j)].degree() == -1);
      double worst = 0.0;
      for (Eigen::Index k = 0; k < J.nodes(); ++k) worst = std::max(worst, J.value(j, k).norm());
      CHECK(worst <= 1e-12);
    }
  for (double tau : kTaus) CHECK(e.defect(tau, 3.0) <= 1e-12);
}

TEST_CASE("curved cross: defect order and parity") {
  const auto sol = solve_soliton(cross_fan(), TopologyDescriptor::parse("12|34", 4));
  const auto jets = star_jets(cross_network(401, 0.3), 5);
  std::vector<double> order;
  for (int J = 1; J <= 3; ++J) {
    ExpansionOptions o;
    o.order = J;
    const auto e = build_expansion(sol, jets, {}, o);
    REQUIRE(e.jets.size() == 4);
    for (const auto& jet : e.jets)
      for (int j = 0; j <= J; ++j) {
        const auto& P = jet.poly[static_cast<std::size_t>(j)];
        CHECK(parity_ok(j, P));
        CHECK(degree_ok(j, P));
        CHECK(jet.residual[static_cast<std::size_t>(j)] <= 1e-10);
        CHECK((jet.value(j, 0) - jet.b[static_cast<std::size_t>(j)]).norm() <= 1e-12);
      }
    const DefectOrder d = defect_order(e, kTaus, 3.0);
    order.push_back(d.order);

    // finite-difference residual of the assembled field agrees
    const double t0 = kTaus[1];
    Eigen::VectorXd taus(5);
    taus << 0.96 * t0, 0.98 * t0, t0, 1.02 * t0, 1.04 * t0;
    const double fd = lifted_flow_residual_profile(e.field(0, taus, 3.0)).row(2).maxCoeff();
    CHECK(fd == doctest::Approx(d.residual[1]).epsilon(0.05));
  }
  CHECK(order[0] >= 1.9);
  CHECK(order[1] - order[0] >= 1.0);
  CHECK(order[2] >= order[1] + 1.0);
}

TEST_CASE("expansion preconditions and export") {
  const auto sol = solve_soliton(cross_fan(), TopologyDescriptor::parse("12|34", 4));
  auto jets = star_jets(cross_network(201, 0.2), 4);
  ExpansionOptions o;
  o.order = 4;
  CHECK_THROWS_AS(build_expansion(sol, jets, {}, o), PreconditionError);
  o.order = 2;
  CHECK_THROWS_AS(build_expansion(sol, {jets[0]}, {}, o), PreconditionError);
  auto tilted = jets;
  tilted[0][1] = Vec2(1.0, 0.1);
  CHECK_THROWS_AS(build_expansion(sol, tilted, {}, o), PreconditionError);

  const auto e = build_expansion(sol, jets, {}, o);
  const auto dump = nlohmann::json::parse(jet_dump(e));
  REQUIRE(dump["jets"].size() == 4);
  const auto& first = dump["jets"][0]["orders"];
  REQUIRE(first.size() == 3);
  // exact rationals survive the round trip
  const auto& jet0 = e.jets[0];
  for (int j = 0; j <= 2; ++j) {
    const auto& xs = first[static_cast<std::size_t>(j)]["poly"]["x"];
    const auto& P = jet0.poly[static_cast<std::size_t>(j)].comp[0];
    REQUIRE(xs.size() == P.coeffs().size());
    for (std::size_t m = 0; m < xs.size(); ++m) CHECK(Rational(xs[m].get<std::string>()) == P.coeffs()[m]);
  }
  std::ostringstream csv;
  write_defect_csv(csv, defect_order(e, kTaus, 3.0));
  CHECK(csv.str().rfind("tau,residual\n", 0) == 0);
}
