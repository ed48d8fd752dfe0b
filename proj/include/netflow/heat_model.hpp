#pragma once

#include "netflow/common.hpp"
#include "netflow/cutoff.hpp"
#include "netflow/mode_solver.hpp"

#include <gmpxx.h>

#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>

namespace netflow {

// Model problem: u_t = u_xx on the quarter plane t, x >= 0 with
// u(0, x) = phi(x), u(t, 0) = psi(t). Blowup coordinates tau = sqrt(2t),
// s = x / sqrt(2t); near the corner u ~ sum_j v_j(s) tau^j with
// v_j'' + s v_j' - j v_j = 0.

using Rational = mpq_class;

struct CRow {
  std::vector<Rational> c;       ///< c[l], l = 0..j
  Rational homogeneous_amplitude;  ///< bc0 - c[0], carried by the decaying mode
};

/// Downward recursion (l+2)(l+1) c_{l+2} + (l-j) c_l = 0 from c_jj.
CRow recursion_c(int j, const Rational& c_jj, const Rational& bc0 = 0);

/// Forward recursion A_{p+1} = (j-2p)(j-2p-1) A_p / (p+1) for p = 0..p_max-1.
std::vector<Rational> recursion_A(int j, const Rational& A_j0, int p_max);

struct SeriesTable {
  int order = 0;
  std::vector<std::vector<Rational>> c;  ///< c[j][l], 0 <= l <= j
  std::vector<std::vector<Rational>> A;  ///< A[j][p], 0 <= p <= order
};

/// Rows from seeds c_jj = A_j0 = seeds[j].
SeriesTable build_series_table(int order, const std::vector<Rational>& seeds);

struct ConsistencyReport {
  bool ok = true;
  int j = -1;  ///< first failing index, -1 if none
  int p = -1;
};

/// Checks 2^p c[j][j-2p] = A[j][p] exactly. Throws PreconditionError when the
/// seeds c[j][j] and A[j][0] differ.
ConsistencyReport cross_consistency(const SeriesTable& table);

/// True iff every c row satisfies its recursion, odd gaps vanish and A rows
/// vanish beyond p = j/2.
bool table_identities_hold(const SeriesTable& table);

void write_series_csv(std::ostream& out, const SeriesTable& table);

struct ModeV0 {
  Eigen::VectorXd s;
  Eigen::VectorXd v;
  double alpha0 = 0.0;
};

/// v_0(s) = c * integral_0^s exp(-sigma^2/2), sampled on [0, s_max].
ModeV0 mode_v0(double c, double s_max = 6.0, int samples = 241);

/// v_j with leading coefficient c_jj, v_j(0) = bc0 and L_j v_j = R.
ModeSolution solve_inhomogeneous_mode(int j, const Polynomial<double>& rhs_poly, double c_jj, double bc0,
                                      const std::function<double(double)>& rhs_decaying = {},
                                      const ModeGrid& grid = {});

/// Initial and boundary data with derivative access: phi(x, k) = phi^(k)(x).
struct BoundaryData {
  std::function<double(double, int)> phi;
  std::function<double(double, int)> psi;
  double support = 1.0;
  std::vector<double> breakpoints;  ///< where phi is only finitely smooth

  static BoundaryData zero();
  /// phi = p(x) * cx(x), psi = q(t) * ct(t).
  static BoundaryData cut_polynomials(const Polynomial<double>& p, const Cutoff& cx, const Polynomial<double>& q,
                                      const Cutoff& ct);
  bool psi_is_zero = false;
};

struct ApproxOptions {
  double blend_scale = 0.65;    ///< sigma0 in S(t) = sigma0 t^(-1/4)
  Cutoff blend{0.5, 1.0};       ///< chi(s / S(t))
  Cutoff borel{0.5, 1.0};       ///< B_j(tau) = borel(j^2 tau)
  Cutoff boundary{0.15, 0.3};   ///< x-profile carrying the residual boundary mismatch
  ModeGrid grid;
};

/// Smooth approximate solution on the blown-up quarter plane:
/// v = chi * (corner series) + (1 - chi) * (Taylor flow of phi) + boundary fix.
class ApproximateV {
 public:
  ApproximateV(const BoundaryData& data, int order, const ApproxOptions& options);

  double value(double t, double x) const;
  /// (d_t - d_x^2) v, evaluated analytically.
  double defect(double t, double x) const;

  int order() const { return order_; }
  int taylor_order() const { return K_; }
  const SeriesTable& table() const { return table_; }
  const std::vector<ModeSolution>& modes() const { return modes_; }
  const ApproxOptions& options() const { return opt_; }
  /// Largest x where the defect can be nonzero for t <= t_max.
  double defect_extent(double t_max) const;

 private:
  double blend_radius(double t) const;  // tau * S(t)
  double corner(double t, double x, double* dx, double* heat) const;
  double taylor(double t, double x, double* dx, double* heat) const;
  double corner_at_boundary(double t, double* dt) const;

  BoundaryData data_;
  int order_;
  int K_;
  ApproxOptions opt_;
  SeriesTable table_;
  std::vector<ModeSolution> modes_;
};

ApproximateV build_approximate_v(const BoundaryData& data, int order, const ApproxOptions& options = {});

/// Observed power p in max_x |defect(t, x)| ~ t^p, fitted over the given times.
double observed_defect_order(const ApproximateV& v, const std::vector<double>& times, double x_max, int x_samples = 400);

/// Dirichlet heat kernel on the half line. Throws DomainError for t <= 0.
double dirichlet_kernel(double t, double x, double xt);

/// Defect source for the kernel correction: f is integrated in x' as its
/// piecewise-linear interpolant on x_i = i h, i h <= x_max, and in t' by
/// 8-point Gauss-Legendre panels graded geometrically toward t' = t.
struct DefectSource {
  std::function<double(double, double)> f;
  double h = 1.0 / 512;
  double x_max = 1.0;
  double sigma_floor = 1e-10;
  double panel_ratio = 1.4;
};

/// w(t, x) = int_0^t int_0^inf H_D(t - t', x, x') f(t', x') dx' dt'.
double correction_w(const DefectSource& src, double t, double x);
std::vector<double> correction_w(const DefectSource& src, double t, const std::vector<double>& xs);

struct CorrectionRows;

struct MixedOptions {
  double h = 1.0 / 512;
  double t_max = 0.1;
  ApproxOptions approx;
};

/// u = v - w.
class MixedSolution {
 public:
  MixedSolution(const BoundaryData& data, int order, const MixedOptions& options);
  MixedSolution(const MixedSolution&) = delete;
  MixedSolution& operator=(const MixedSolution&) = delete;
  double u(double t, double x) const { return v_.value(t, x) - w(t, x); }
  double v(double t, double x) const { return v_.value(t, x); }
  double w(double t, double x) const;
  double defect(double t, double x) const { return v_.defect(t, x); }
  const ApproximateV& approximation() const { return v_; }
  const MixedOptions& options() const { return opt_; }

 private:
  MixedOptions opt_;
  ApproximateV v_;
  DefectSource src_;
  std::shared_ptr<CorrectionRows> cache_;
};

MixedSolution solve_mixed(const BoundaryData& data, int order, const MixedOptions& options = {});

/// Independent reference u = int H_D phi + boundary potential of psi, by
/// adaptive Gauss-Kronrod quadrature.
double heat_reference(const BoundaryData& data, double t, double x);

/// Crank-Nicolson on [0, L] with a few implicit Euler start-up steps.
struct GridSolution {
  double h = 0.0;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> u;  ///< per recorded time
};
GridSolution crank_nicolson(const BoundaryData& data, double length, double h, double dt, double t_end,
                            int euler_steps = 4);

struct LiftedSmoothness {
  double sup_ds = 0.0;       ///< sup |d_s u|
  double sup_tau_dtau = 0.0;  ///< sup |tau d_tau u|
};

/// Finite-difference derivatives of u in (tau, s) over tau in [tau_min, tau_max],
/// s in [0, s_max].
LiftedSmoothness lifted_smoothness(const MixedSolution& sol, double tau_min, double tau_max, double s_max,
                                   int tau_samples = 24, int s_samples = 49);

void write_field_csv(std::ostream& out, const MixedSolution& sol, const std::vector<double>& times,
                     const std::vector<double>& xs);

}  // namespace netflow
