#pragma once

#include "netflow/cutoff.hpp"
#include "netflow/expander.hpp"
#include "netflow/heat_model.hpp"
#include "netflow/mode_solver.hpp"
#include "netflow/polynomial.hpp"

#include <array>
#include <functional>
#include <iosfwd>

namespace netflow {

// ---------------------------------------------------------------------------
// Blowup charts of the quarter plane {t >= 0, x >= 0}. Coordinate order:
// physical (t, x), projective (tau, s) with tau = sqrt(2t), s = x / tau,
// corner (T, y) with T = t / x^2, y = x, polar (rho, omega) with
// x = rho cos omega, t = rho^2 sin omega.

enum class Chart { Physical, Projective, Corner, Polar };

/// Throws DomainError outside the quarter plane or on a face where the
/// target chart is singular.
Vec2 chart_map(Chart from, Chart to, const Vec2& p);
/// d(to) / d(from) at p, given in `from` coordinates.
Mat2 chart_jacobian(Chart from, Chart to, const Vec2& p);

struct FieldSample {
  Vec2 point = Vec2::Zero();
  double value = 0.0;
  Vec2 gradient = Vec2::Zero();  ///< partials in the chart's own coordinates
};

/// Re-expresses samples in another chart; gradients follow the chain rule.
std::vector<FieldSample> lift_field(Chart from, Chart to, const std::vector<FieldSample>& samples);
/// The same field as a function of the target chart's coordinates.
std::function<double(const Vec2&)> lift_function(Chart from, Chart to, std::function<double(const Vec2&)> f);

// ---------------------------------------------------------------------------
// Lifted flow: gamma = tau eta(tau, s) turns the flow into
// (tau d_tau + 1 - s d_s) eta = eta_ss / |eta_s|^2.

struct LiftedField {
  Eigen::VectorXd tau;
  Eigen::VectorXd s;
  std::vector<Points> eta;  ///< eta[i][k] at (tau_i, s_k)
};

/// Residual at every node, using centered Fornberg stencils (one-sided near
/// the grid edges). Throws DegenerateParametrization when |eta_s| is tiny.
Eigen::MatrixXd lifted_flow_residual_profile(const LiftedField& field);
double lifted_flow_residual(const LiftedField& field);

// ---------------------------------------------------------------------------
// Corner expansion eta ~ sum_j tau^j eta_j(s). At order j:
// L_j eta_j + (perturbations from eta_0) + Q_j(eta_0, ..., eta_{j-1}) = 0,
// L_j u = u'' + s u' - (j + 1) u.

/// Polynomial part of Q_j from the polynomial parts of eta_0 .. eta_{j-1}:
/// Q_j = sum_{i=1}^{j-1} eta_i'' (B_{j-i} - 2 eta_0' . eta_{j-i}'), with B from
/// the expansion of 1 / |eta'|^2. Requires |eta_0'|^2 == 1.
template <typename Scalar>
VecPoly<Scalar> assemble_Q(int j, const std::vector<VecPoly<Scalar>>& eta);

/// Solution of L_j u = R (per component) with deg u = j + 1, leading
/// coefficient a and u(0) = b. `decaying` is the rapidly decaying part of R.
struct LjSolution {
  int j = 0;
  VecPoly<double> poly;
  std::array<ModeSolution, 2> comp;
  Vec2 value(double s) const;
  Vec2 derivative(double s) const;
  double residual() const;
};

LjSolution solve_Lj(int j, const VecPoly<double>& R, const Vec2& a, const Vec2& b,
                    const std::function<Vec2(double)>& decaying = {}, const ModeGrid& grid = {});

/// Exact polynomial part of the same problem: L_j P = R, leading coefficient a.
VecPoly<Rational> Lj_polynomial(int j, const VecPoly<Rational>& R, const std::array<Rational, 2>& a);

VecPoly<double> to_double(const VecPoly<Rational>& p);

/// Unit vector with rational coordinates within a few ulps of unit_at(angle).
std::array<Rational, 2> rational_unit(double angle);

/// Fourth-order discrete L_j on a uniform grid (interior nodes; ends zero).
Eigen::VectorXd apply_Lj(int j, double h, const Eigen::VectorXd& u);

/// j even: odd polynomial; j odd: even polynomial.
template <typename Scalar>
bool parity_ok(int j, const VecPoly<Scalar>& p) {
  return p.has_parity(j % 2 == 0 ? 1 : 0);
}
/// Degree at most j + 1 with no s^j term.
template <typename Scalar>
bool degree_ok(int j, const VecPoly<Scalar>& p) {
  return p.degree() <= j + 1 && p.comp[0].coeff(j) == Scalar(0) && p.comp[1].coeff(j) == Scalar(0);
}

// ---------------------------------------------------------------------------
// Junction chart F(v, w) = (v1 - v2, v2 - v3, sum w_i / |w_i|, v1, |w1|, |w2|,
// |w3|, theta) with theta the polar angle of w1.

struct JunctionCauchy {
  std::array<Vec2, 3> v{};  ///< endpoint positions
  std::array<Vec2, 3> w{};  ///< endpoint derivatives
};

using ChartVector = Eigen::Matrix<double, 12, 1>;
using ChartMatrix = Eigen::Matrix<double, 12, 12>;

/// Throws DomainError when some |w_i| vanishes.
ChartVector junction_chart_eval(const JunctionCauchy& c);
/// Rows follow the outputs, columns (v1, v2, v3, w1, w2, w3).
ChartMatrix junction_chart_jacobian(const JunctionCauchy& c);
/// Newton from `seed`; InversionFailure when it stalls.
JunctionCauchy junction_chart_invert(const ChartVector& target, const JunctionCauchy& seed, double tol = 1e-13,
                                     int max_iterations = 50);

/// Complementary data as polynomials in tau (coefficients lowest first).
struct ComplementaryData {
  std::vector<Vec2> beta;                  ///< common vertex
  std::array<std::vector<double>, 3> zeta;  ///< tangent lengths
  std::vector<double> theta;               ///< phase
};

/// Data frozen at the given Cauchy data (constants in tau).
ComplementaryData frozen_complementary(const JunctionCauchy& at0);
/// Cauchy data F^{-1}(0, 0, 0, beta(tau), zeta(tau), theta(tau)).
JunctionCauchy complementary_cauchy(const ComplementaryData& d, double tau, const JunctionCauchy& seed);

// ---------------------------------------------------------------------------

/// Expansion of one external soliton arc.
struct ExpansionJet {
  int arc = -1;
  int junction = -1;
  SolitonProfile base;                 ///< eta_0 on the uniform grid
  std::vector<VecPoly<Rational>> poly;  ///< exact polynomial parts, poly[0] = a_0 s
  std::vector<Points> z, dz, d2z;      ///< decaying corrections; z[0] = eta_0 - a_0 s
  std::vector<Vec2> a, b;              ///< leading coefficients and values at s = 0
  std::vector<double> residual;        ///< discrete corrector residual per order
  std::vector<Points> values, firsts, seconds;  ///< eta_j, eta_j', eta_j'' at the nodes

  int order() const { return static_cast<int>(poly.size()) - 1; }
  Eigen::Index nodes() const { return base.s.size(); }
  const Vec2& value(int j, Eigen::Index node) const { return values[static_cast<std::size_t>(j)][static_cast<std::size_t>(node)]; }
  const Vec2& d1(int j, Eigen::Index node) const { return firsts[static_cast<std::size_t>(j)][static_cast<std::size_t>(node)]; }
  const Vec2& d2(int j, Eigen::Index node) const { return seconds[static_cast<std::size_t>(j)][static_cast<std::size_t>(node)]; }
};

struct ExpansionOptions {
  int order = 3;
  int max_order = 3;
  double s_max = 10.0;
  int intervals = 2000;
  Cutoff borel{1.0, 2.0};  ///< order j carries chi(j^2 tau)
};

struct Expansion {
  Vec2 center = Vec2::Zero();
  std::vector<ExpansionJet> jets;
  std::vector<JunctionCauchy> junction_data;  ///< Cauchy data at tau = 0 per junction
  Cutoff borel;

  /// eta-hat(tau, s_k) of jet `jet` truncated at `order` (all orders when < 0).
  Points eta(int jet, double tau, int order = -1) const;
  /// Analytic lifted defect at the grid nodes with s <= s_max.
  double defect(double tau, double s_max, int order = -1) const;
  /// Field on a (tau, s) grid for the finite-difference residual.
  LiftedField field(int jet, const Eigen::VectorXd& tau, double s_max, int order = -1) const;
};

/// taylor[l][m] is the x^m coefficient of the initial curve leaving the
/// vertex along fan direction l, m = 0 .. order + 1. Curves are rescaled to
/// unit speed at the vertex. Jets are built for external arcs only; internal
/// arcs and geodesics stay at leading order. `junctions` defaults to data
/// frozen at the soliton.
Expansion build_expansion(const SolitonNetwork& sol, const std::vector<std::vector<Vec2>>& taylor,
                          const std::vector<ComplementaryData>& junctions = {}, const ExpansionOptions& options = {});

/// Least-squares Taylor coefficients of a sampled curve at one end, in its
/// own parameter measured from that end.
std::vector<Vec2> curve_taylor(const PolyCurve& c, End end, int order, int samples = 0);

struct DefectOrder {
  std::vector<double> tau, residual;
  double order = 0.0;  ///< least-squares slope of log residual against log tau
};

DefectOrder defect_order(const Expansion& e, const std::vector<double>& taus, double s_max, int order = -1);

/// JSON jet dump: exact binary rationals as strings plus corrector samples.
std::string jet_dump(const Expansion& e);
void write_defect_csv(std::ostream& out, const DefectOrder& d);

// ---------------------------------------------------------------------------

template <typename Scalar>
VecPoly<Scalar> assemble_Q(int j, const std::vector<VecPoly<Scalar>>& eta) {
  if (j < 1) throw PreconditionError("Q_j needs j >= 1");
  if (static_cast<int>(eta.size()) < j) throw PreconditionError("missing jet below order " + std::to_string(j));
  std::vector<VecPoly<Scalar>> d, dd;
  for (int i = 0; i < j; ++i) {
    d.push_back(eta[static_cast<std::size_t>(i)].derivative());
    dd.push_back(eta[static_cast<std::size_t>(i)].derivative(2));
  }
  if (!(dot(d[0], d[0]) == Polynomial<Scalar>::constant(Scalar(1))))
    throw PreconditionError("|eta_0'|^2 must equal 1");
  // |eta'|^2 = 1 + sum W_m tau^m, 1 / |eta'|^2 = sum F_l tau^l.
  std::vector<Polynomial<Scalar>> W(static_cast<std::size_t>(j)), F(static_cast<std::size_t>(j));
  for (int m = 1; m < j; ++m)
    for (int a = 0; a <= m; ++a) W[static_cast<std::size_t>(m)] += dot(d[static_cast<std::size_t>(a)], d[static_cast<std::size_t>(m - a)]);
  F[0] = Polynomial<Scalar>::constant(Scalar(1));
  for (int l = 1; l < j; ++l)
    for (int m = 1; m <= l; ++m) F[static_cast<std::size_t>(l)] -= W[static_cast<std::size_t>(m)] * F[static_cast<std::size_t>(l - m)];
  VecPoly<Scalar> Q;
  for (int i = 1; i < j; ++i) {
    const auto l = static_cast<std::size_t>(j - i);
    const Polynomial<Scalar> cross = dot(d[0], d[l]) * Scalar(2);
    const Polynomial<Scalar> B = F[l] + cross;
    Q = Q + (B - cross) * dd[static_cast<std::size_t>(i)];
  }
  return Q;
}

}  // namespace netflow
