#include "netflow/mode_solver.hpp"

#include "netflow/common.hpp"
#include "fd_detail.hpp"

#include <Eigen/SparseLU>

namespace netflow {

using detail::derivative4;
using detail::stencil;

Polynomial<double> mode_polynomial(int n, const Polynomial<double>& rhs_poly, double leading) {
  if (n < 0) throw PreconditionError("mode index must be nonnegative");
  if (rhs_poly.degree() > n - 1)
    throw PreconditionError("right-hand side degree " + std::to_string(rhs_poly.degree()) + " exceeds " +
                            std::to_string(n - 1));
  std::vector<double> a(static_cast<std::size_t>(n) + 3, 0.0);
  a[static_cast<std::size_t>(n)] = leading;
  for (int i = n - 1; i >= 0; --i)
    a[static_cast<std::size_t>(i)] =
        (rhs_poly.coeff(i) - (i + 2.0) * (i + 1.0) * a[static_cast<std::size_t>(i) + 2]) / (i - n);
  return Polynomial<double>(std::move(a));
}

ModeSolution solve_mode(int n, const Polynomial<double>& rhs_poly, double leading, double bc0,
                        const std::function<double(double)>& rhs_decaying, const ModeGrid& grid) {
  ModeSolution sol;
  sol.n = n;
  sol.grid = grid;
  sol.poly = mode_polynomial(n, rhs_poly, leading);
  sol.rhs_decaying = rhs_decaying;
  const Eigen::Index N = grid.intervals;
  if (N < 10) throw PreconditionError("mode grid too coarse");
  const double h = grid.step();
  const double z0 = bc0 - sol.poly(0.0);

  Eigen::VectorXd r = Eigen::VectorXd::Zero(N + 1);
  if (rhs_decaying)
    for (Eigen::Index i = 0; i <= N; ++i) r(i) = rhs_decaying(static_cast<double>(i) * h);

  // Unknowns z_1 .. z_{N-1}; z_0 = z0, z_N = 0.
  const Eigen::Index m = N - 1;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs(m);
  for (Eigen::Index i = 1; i < N; ++i) {
    const double s = static_cast<double>(i) * h;
    const auto st = stencil(i, N, h);
    double b = r(i);
    for (int k = 0; k < st.width; ++k) {
      const Eigen::Index col = st.first + k;
      double coef = st.d2[k] + s * st.d1[k];
      if (col == i) coef -= n;
      if (coef == 0.0) continue;
      if (col == 0)
        b -= coef * z0;
      else if (col == N)
        continue;
      else
        trip.emplace_back(i - 1, col - 1, coef);
    }
    rhs(i - 1) = b;
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SolverFailure("mode corrector factorization failed", 0.0);
  const Eigen::VectorXd inner = lu.solve(rhs);
  sol.z = Eigen::VectorXd::Zero(N + 1);
  sol.z(0) = z0;
  sol.z.segment(1, m) = inner;
  sol.dz = derivative4(sol.z, h);
  const double res = sol.discrete_residual();
  if (!std::isfinite(res)) throw SolverFailure("mode corrector produced non-finite values", res);
  return sol;
}

double ModeSolution::corrector(double s) const {
  const double h = grid.step();
  if (s >= grid.s_max || s < 0) return s < 0 ? z(0) : 0.0;
  const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(s / h), z.size() - 2);
  const double u = s / h - static_cast<double>(i);
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
  return h00 * z(i) + h10 * h * dz(i) + h01 * z(i + 1) + h11 * h * dz(i + 1);
}

double ModeSolution::corrector_derivative(double s) const {
  const double h = grid.step();
  if (s >= grid.s_max || s < 0) return s < 0 ? dz(0) : 0.0;
  const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(s / h), z.size() - 2);
  const double u = s / h - static_cast<double>(i);
  const double g00 = 6 * u * (u - 1), g10 = (1 - u) * (1 - 3 * u);
  const double g01 = -6 * u * (u - 1), g11 = u * (3 * u - 2);
  return (g00 * z(i) + g01 * z(i + 1)) / h + g10 * dz(i) + g11 * dz(i + 1);
}

double ModeSolution::second_derivative(double s, const Polynomial<double>& rhs_poly) const {
  double r = rhs_poly(s);
  if (rhs_decaying && s < grid.s_max) r += rhs_decaying(s);
  return r + n * value(s) - s * derivative(s);
}

double ModeSolution::discrete_residual() const {
  const Eigen::Index N = grid.intervals;
  const double h = grid.step();
  double worst = 0.0;
  for (Eigen::Index i = 1; i < N; ++i) {
    const double s = static_cast<double>(i) * h;
    const auto st = stencil(i, N, h);
    double lhs = -n * z(i);
    for (int k = 0; k < st.width; ++k) lhs += (st.d2[k] + s * st.d1[k]) * z(st.first + k);
    const double r = rhs_decaying ? rhs_decaying(s) : 0.0;
    worst = std::max(worst, std::abs(lhs - r));
  }
  return worst;
}

}  // namespace netflow
