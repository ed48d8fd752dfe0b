#include "netflow/heat_model.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/SparseLU>

#include <algorithm>
#include <ostream>

namespace netflow {

namespace {

using boost::math::quadrature::gauss_kronrod;

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

double gauss(double sigma, double z) { return std::exp(-z * z / (4.0 * sigma)) / std::sqrt(4.0 * kPi * sigma); }

}  // namespace

CRow recursion_c(int j, const Rational& c_jj, const Rational& bc0) {
  if (j < 0) throw PreconditionError("order must be nonnegative");
  CRow row;
  row.c.assign(static_cast<std::size_t>(j) + 1, Rational(0));
  row.c[static_cast<std::size_t>(j)] = c_jj;
  row.c[static_cast<std::size_t>(j)].canonicalize();
  for (int l = j - 1; l >= 0; --l) {
    const Rational above = l + 2 <= j ? row.c[static_cast<std::size_t>(l) + 2] : Rational(0);
    row.c[static_cast<std::size_t>(l)] = Rational((l + 2) * (l + 1)) * above / Rational(j - l);
  }
  Rational b = bc0;
  b.canonicalize();
  row.homogeneous_amplitude = b - row.c[0];
  return row;
}

std::vector<Rational> recursion_A(int j, const Rational& A_j0, int p_max) {
  std::vector<Rational> a(static_cast<std::size_t>(p_max) + 1, Rational(0));
  a[0] = A_j0;
  a[0].canonicalize();
  for (int p = 0; p < p_max; ++p)
    a[static_cast<std::size_t>(p) + 1] =
        Rational((j - 2 * p) * (j - 2 * p - 1)) * a[static_cast<std::size_t>(p)] / Rational(p + 1);
  return a;
}

SeriesTable build_series_table(int order, const std::vector<Rational>& seeds) {
  if (static_cast<int>(seeds.size()) < order + 1) throw PreconditionError("one seed per order is required");
  SeriesTable t;
  t.order = order;
  for (int j = 0; j <= order; ++j) {
    t.c.push_back(recursion_c(j, seeds[static_cast<std::size_t>(j)]).c);
    t.A.push_back(recursion_A(j, seeds[static_cast<std::size_t>(j)], order));
  }
  return t;
}

ConsistencyReport cross_consistency(const SeriesTable& table) {
  ConsistencyReport rep;
  for (int j = 0; j <= table.order; ++j)
    if (table.c[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] != table.A[static_cast<std::size_t>(j)][0])
      throw PreconditionError("seed mismatch at j = " + std::to_string(j));
  for (int j = 0; j <= table.order; ++j) {
    const auto& c = table.c[static_cast<std::size_t>(j)];
    const auto& A = table.A[static_cast<std::size_t>(j)];
    for (int p = 0; 2 * p <= j; ++p) {
      Rational lhs = c[static_cast<std::size_t>(j - 2 * p)];
      lhs *= Rational(mpz_class(1) << static_cast<mp_bitcnt_t>(p));
      if (lhs != A[static_cast<std::size_t>(p)]) {
        rep.ok = false;
        rep.j = j;
        rep.p = p;
        return rep;
      }
    }
  }
  return rep;
}

bool table_identities_hold(const SeriesTable& table) {
  for (int j = 0; j <= table.order; ++j) {
    const auto& c = table.c[static_cast<std::size_t>(j)];
    auto cc = [&](int l) { return l <= j ? c[static_cast<std::size_t>(l)] : Rational(0); };
    for (int l = 0; l <= j; ++l)
      if (Rational((l + 2) * (l + 1)) * cc(l + 2) + Rational(l - j) * cc(l) != 0) return false;
    for (int l = j - 1; l >= 0; l -= 2)
      if (cc(l) != 0) return false;
    const auto& A = table.A[static_cast<std::size_t>(j)];
    for (std::size_t p = 0; p + 1 < A.size(); ++p) {
      const int pi = static_cast<int>(p);
      if (Rational(pi + 1) * A[p + 1] != Rational((j - 2 * pi) * (j - 2 * pi - 1)) * A[p]) return false;
      if (2 * pi > j && A[p] != 0) return false;
    }
    if (2 * (static_cast<int>(A.size()) - 1) > j && A.back() != 0) return false;
  }
  return true;
}

void write_series_csv(std::ostream& out, const SeriesTable& table) {
  out << "table,j,index,numerator,denominator\n";
  for (int j = 0; j <= table.order; ++j) {
    const auto& c = table.c[static_cast<std::size_t>(j)];
    for (std::size_t l = 0; l < c.size(); ++l)
      out << "c," << j << ',' << l << ',' << c[l].get_num().get_str() << ',' << c[l].get_den().get_str() << '\n';
  }
  for (int j = 0; j <= table.order; ++j) {
    const auto& A = table.A[static_cast<std::size_t>(j)];
    for (std::size_t p = 0; p < A.size(); ++p)
      out << "A," << j << ',' << p << ',' << A[p].get_num().get_str() << ',' << A[p].get_den().get_str() << '\n';
  }
}

ModeV0 mode_v0(double c, double s_max, int samples) {
  ModeV0 m;
  m.s = Eigen::VectorXd::LinSpaced(samples, 0.0, s_max);
  m.v = Eigen::VectorXd::Zero(samples);
  m.alpha0 = c * std::sqrt(kPi / 2.0);
  if (c == 0.0) return m;
  auto g = [](double x) { return std::exp(-0.5 * x * x); };
  double acc = 0.0;
  for (int i = 1; i < samples; ++i) {
    acc += gauss_kronrod<double, 31>::integrate(g, m.s(i - 1), m.s(i), 10, 1e-15);
    m.v(i) = c * acc;
  }
  return m;
}

ModeSolution solve_inhomogeneous_mode(int j, const Polynomial<double>& rhs_poly, double c_jj, double bc0,
                                      const std::function<double(double)>& rhs_decaying, const ModeGrid& grid) {
  return solve_mode(j, rhs_poly, c_jj, bc0, rhs_decaying, grid);
}

BoundaryData BoundaryData::zero() {
  BoundaryData d;
  d.phi = [](double, int) { return 0.0; };
  d.psi = [](double, int) { return 0.0; };
  d.support = 0.0;
  d.psi_is_zero = true;
  return d;
}

BoundaryData BoundaryData::cut_polynomials(const Polynomial<double>& p, const Cutoff& cx, const Polynomial<double>& q,
                                           const Cutoff& ct) {
  auto product = [](const Polynomial<double>& poly, Cutoff cut) {
    std::vector<Polynomial<double>> ders{poly};
    for (int i = 1; i <= poly.degree(); ++i) ders.push_back(ders.back().derivative());
    return [ders, cut](double x, int k) {
      double acc = 0.0;
      for (int i = 0; i <= k && i < static_cast<int>(ders.size()); ++i)
        acc += binomial(k, i) * ders[static_cast<std::size_t>(i)](x) * cut(x, k - i);
      return acc;
    };
  };
  BoundaryData d;
  d.phi = product(p, cx);
  d.psi = product(q, ct);
  d.support = p.is_zero() ? 0.0 : cx.b();
  if (!p.is_zero()) d.breakpoints = {cx.a(), cx.b()};
  d.psi_is_zero = q.is_zero();
  return d;
}

ApproximateV::ApproximateV(const BoundaryData& data, int order, const ApproxOptions& options)
    : data_(data), order_(order), K_(std::max(1, (order + 1) / 2)), opt_(options) {
  if (order < 0) throw PreconditionError("expansion order must be nonnegative");
  if (!data.phi || !data.psi) throw PreconditionError("boundary data needs phi and psi jets");
  std::vector<Rational> seeds;
  for (int j = 0; j <= order; ++j) {
    const double d = data.phi(0.0, j);
    if (!std::isfinite(d)) throw PreconditionError("phi jet of order " + std::to_string(j) + " is not finite");
    seeds.emplace_back(d / factorial(j));
  }
  table_ = build_series_table(order, seeds);
  for (int j = 0; j <= order; ++j) {
    double bc0 = 0.0;
    if (j % 2 == 0) {
      const int m = j / 2;
      bc0 = data.psi(0.0, m) / (factorial(m) * std::pow(2.0, m));
      if (!std::isfinite(bc0)) throw PreconditionError("psi jet of order " + std::to_string(m) + " is not finite");
    }
    modes_.push_back(solve_mode(j, {}, seeds[static_cast<std::size_t>(j)].get_d(), bc0, {}, opt_.grid));
  }
}

double ApproximateV::blend_radius(double t) const { return opt_.blend_scale * std::sqrt(2.0) * std::pow(t, 0.25); }

double ApproximateV::defect_extent(double t_max) const {
  return std::max({data_.support, blend_radius(t_max) * opt_.blend.b(), data_.psi_is_zero ? 0.0 : opt_.boundary.b()});
}

double ApproximateV::corner(double t, double x, double* dx, double* heat) const {
  const double tau = std::sqrt(2.0 * t);
  const double s = x / tau;
  double a = 0.0, ax = 0.0, la = 0.0;
  for (int j = 0; j <= order_; ++j) {
    const auto& m = modes_[static_cast<std::size_t>(j)];
    const double jj = static_cast<double>(j * j);
    const double B = j == 0 ? 1.0 : opt_.borel(jj * tau);
    const double dB = j == 0 ? 0.0 : jj * opt_.borel(jj * tau, 1);
    if (B == 0.0 && dB == 0.0) continue;
    const double vj = m.value(s);
    const double tj = std::pow(tau, j);
    a += tj * B * vj;
    if (dx) ax += tj / tau * B * m.derivative(s);
    if (heat) la += tj / tau * dB * vj;
  }
  if (dx) *dx = ax;
  if (heat) *heat = la;
  return a;
}

double ApproximateV::taylor(double t, double x, double* dx, double* heat) const {
  double b = 0.0, bx = 0.0, tk = 1.0;
  for (int k = 0; k <= K_; ++k) {
    const double w = tk / factorial(k);
    b += w * data_.phi(x, 2 * k);
    if (dx) bx += w * data_.phi(x, 2 * k + 1);
    if (k < K_) tk *= t;
  }
  if (dx) *dx = bx;
  if (heat) *heat = -tk / factorial(K_) * data_.phi(x, 2 * K_ + 2);
  return b;
}

double ApproximateV::corner_at_boundary(double t, double* dt) const {
  const double tau = std::sqrt(2.0 * t);
  double a = 0.0, dtau = 0.0;
  for (int j = 0; j <= order_; ++j) {
    const double b0 = modes_[static_cast<std::size_t>(j)].value(0.0);
    if (b0 == 0.0) continue;
    const double jj = static_cast<double>(j * j);
    const double B = j == 0 ? 1.0 : opt_.borel(jj * tau);
    const double dB = j == 0 ? 0.0 : jj * opt_.borel(jj * tau, 1);
    a += std::pow(tau, j) * B * b0;
    dtau += ((j > 0 ? j * std::pow(tau, j - 1) : 0.0) * B + std::pow(tau, j) * dB) * b0;
  }
  if (dt) *dt = dtau / tau;
  return a;
}

double ApproximateV::value(double t, double x) const {
  if (t <= 0.0) return data_.phi(x, 0);
  const double r = x / blend_radius(t);
  const double chi = opt_.blend(r);
  double v = 0.0;
  if (chi > 0.0) v += chi * corner(t, x, nullptr, nullptr);
  if (chi < 1.0) v += (1.0 - chi) * taylor(t, x, nullptr, nullptr);
  const double kappa = opt_.boundary(x);
  if (kappa > 0.0) v += kappa * (data_.psi(t, 0) - corner_at_boundary(t, nullptr));
  return v;
}

double ApproximateV::defect(double t, double x) const {
  if (t <= 0.0) return 0.0;
  const double R = blend_radius(t);
  const double r = x / R;
  const double chi = opt_.blend(r), d1 = opt_.blend(r, 1), d2 = opt_.blend(r, 2);
  double A = 0.0, Ax = 0.0, LA = 0.0, B = 0.0, Bx = 0.0, LB = 0.0;
  const bool need_a = chi > 0.0 || d1 != 0.0 || d2 != 0.0;
  const bool need_b = chi < 1.0;
  if (need_a) A = corner(t, x, &Ax, &LA);
  if (need_b) B = taylor(t, x, &Bx, &LB);
  const double chi_x = d1 / R;
  const double chi_xx = d2 / (R * R);
  const double chi_t = -d1 * r / (4.0 * t);
  double f = chi * LA + (1.0 - chi) * LB;
  if (d1 != 0.0 || d2 != 0.0) f += (chi_t - chi_xx) * (A - B) - 2.0 * chi_x * (Ax - Bx);
  const double kappa = opt_.boundary(x), kappa_xx = opt_.boundary(x, 2);
  if (kappa != 0.0 || kappa_xx != 0.0) {
    double dA0 = 0.0;
    const double m = data_.psi(t, 0) - corner_at_boundary(t, &dA0);
    const double dm = data_.psi(t, 1) - dA0;
    f += kappa * dm - kappa_xx * m;
  }
  return f;
}

ApproximateV build_approximate_v(const BoundaryData& data, int order, const ApproxOptions& options) {
  return ApproximateV(data, order, options);
}

double observed_defect_order(const ApproximateV& v, const std::vector<double>& times, double x_max, int x_samples) {
  if (times.size() < 2) throw InsufficientData("need at least two times");
  std::vector<double> lx, ly;
  for (double t : times) {
    double m = 0.0;
    for (int i = 1; i <= x_samples; ++i) m = std::max(m, std::abs(v.defect(t, x_max * i / x_samples)));
    if (m <= 0.0) continue;
    lx.push_back(std::log(t));
    ly.push_back(std::log(m));
  }
  if (lx.size() < 2) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double dirichlet_kernel(double t, double x, double xt) {
  if (!(t > 0.0)) throw DomainError("heat kernel needs t > 0");
  return gauss(t, x - xt) - gauss(t, x + xt);
}

namespace {

// int_0^X H_D(sigma, x, x') f(x') dx' with f piecewise linear on x_i = i h.
double slice_integral(const double* f, Eigen::Index nx, double h, double sigma, double x) {
  const double root = 2.0 * std::sqrt(sigma);
  const double window = 8.5 * root;
  double total = 0.0;
  for (int sign = 0; sign < 2; ++sign) {
    const double c = sign == 0 ? x : -x;
    const Eigen::Index lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor((c - window) / h)));
    const Eigen::Index hi = std::min<Eigen::Index>(nx - 1, static_cast<Eigen::Index>(std::ceil((c + window) / h)));
    if (lo >= hi) continue;
    double acc = 0.0;
    double xp = static_cast<double>(lo) * h;
    double ep = 0.5 * std::erf((xp - c) / root), gp = gauss(sigma, xp - c);
    for (Eigen::Index i = lo; i < hi; ++i) {
      const double xq = static_cast<double>(i + 1) * h;
      const double eq = 0.5 * std::erf((xq - c) / root), gq = gauss(sigma, xq - c);
      const double fi = f[i], fj = f[i + 1];
      if (fi != 0.0 || fj != 0.0) {
        const double beta = (fj - fi) / h;
        const double alpha = fi - beta * xp;
        acc += (alpha + beta * c) * (eq - ep) - 2.0 * sigma * beta * (gq - gp);
      }
      xp = xq;
      ep = eq;
      gp = gq;
    }
    total += sign == 0 ? acc : -acc;
  }
  return total;
}

}  // namespace

// Defect rows f(t - sigma_k, x_i) at the time quadrature nodes of one t.
struct CorrectionRows {
  double t = -1.0;
  double h = 0.0;
  std::vector<double> sigma, weight;
  Eigen::MatrixXd f;  // column k holds the x-samples at sigma[k]
  std::mutex mutex;

  void build(const DefectSource& src, double t_new) {
    using Rule = boost::math::quadrature::gauss<double, 8>;
    t = t_new;
    h = src.h;
    sigma.clear();
    weight.clear();
    std::vector<double> cuts{0.0};
    for (double c = std::min(src.sigma_floor, t); c < t; c *= src.panel_ratio) cuts.push_back(c);
    cuts.push_back(t);
    const auto& xa = Rule::abscissa();
    const auto& wa = Rule::weights();
    for (std::size_t p = 1; p < cuts.size(); ++p) {
      const double mid = 0.5 * (cuts[p] + cuts[p - 1]), half = 0.5 * (cuts[p] - cuts[p - 1]);
      if (half <= 0.0) continue;
      for (std::size_t q = 0; q < xa.size(); ++q) {
        for (int sgn : {-1, 1}) {
          if (xa[q] == 0.0 && sgn < 0) continue;
          sigma.push_back(mid + sgn * half * xa[q]);
          weight.push_back(half * wa[q]);
        }
      }
    }
    const auto nx = static_cast<Eigen::Index>(std::ceil(src.x_max / h - 1e-9)) + 1;
    f.resize(nx, static_cast<Eigen::Index>(sigma.size()));
    for (Eigen::Index k = 0; k < f.cols(); ++k)
      for (Eigen::Index i = 0; i < nx; ++i) f(i, k) = src.f(t - sigma[static_cast<std::size_t>(k)], static_cast<double>(i) * h);
  }

  double eval(double x) const {
    double w = 0.0;
    for (Eigen::Index k = 0; k < f.cols(); ++k)
      w += weight[static_cast<std::size_t>(k)] *
           slice_integral(f.col(k).data(), f.rows(), h, sigma[static_cast<std::size_t>(k)], x);
    return w;
  }
};

std::vector<double> correction_w(const DefectSource& src, double t, const std::vector<double>& xs) {
  std::vector<double> out(xs.size(), 0.0);
  if (t <= 0.0) return out;
  CorrectionRows rows;
  rows.build(src, t);
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = rows.eval(xs[i]);
  return out;
}

double correction_w(const DefectSource& src, double t, double x) { return correction_w(src, t, std::vector<double>{x})[0]; }

MixedSolution::MixedSolution(const BoundaryData& data, int order, const MixedOptions& options)
    : opt_(options), v_(data, order, options.approx), cache_(std::make_shared<CorrectionRows>()) {
  const ApproximateV* approx = &v_;
  src_.f = [approx](double t, double x) { return approx->defect(t, x); };
  src_.h = opt_.h;
  src_.x_max = v_.defect_extent(opt_.t_max) + 4.0 * opt_.h;
}

double MixedSolution::w(double t, double x) const {
  if (t <= 0.0) return 0.0;
  if (t > opt_.t_max * (1 + 1e-12)) throw RangeError("correction requested beyond the defect window");
  std::lock_guard<std::mutex> lock(cache_->mutex);
  if (cache_->t != t) cache_->build(src_, t);
  return cache_->eval(x);
}

MixedSolution solve_mixed(const BoundaryData& data, int order, const MixedOptions& options) {
  return MixedSolution(data, order, options);
}

double heat_reference(const BoundaryData& data, double t, double x) {
  if (t <= 0.0) return data.phi(x, 0);
  double u = 0.0;
  if (data.support > 0.0) {
    auto f = [&](double xt) { return dirichlet_kernel(t, x, xt) * data.phi(xt, 0); };
    // Panels split at the kernel peak and where phi loses smoothness, then
    // subdivided to the kernel width.
    std::vector<double> cuts{0.0, data.support, std::clamp(x, 0.0, data.support)};
    for (double b : data.breakpoints)
      if (b > 0.0 && b < data.support) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    const double width = 2.0 * std::sqrt(t);
    for (std::size_t i = 1; i < cuts.size(); ++i) {
      const double a = cuts[i - 1], b = cuts[i];
      if (b - a <= 0.0) continue;
      const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / width)));
      for (int p = 0; p < pieces; ++p) {
        const double lo = a + (b - a) * p / pieces, hi = a + (b - a) * (p + 1) / pieces;
        if (std::min(std::abs(x - lo), std::abs(x - hi)) > 9.0 * width && (x < lo || x > hi)) continue;
        u += gauss_kronrod<double, 61>::integrate(f, lo, hi, 12, 1e-13);
      }
    }
  }
  if (!data.psi_is_zero) {
    if (x == 0.0) return data.psi(t, 0);
    auto g = [&](double tt) {
      const double d = t - tt;
      if (d <= 0.0) return 0.0;
      return data.psi(tt, 0) * x / (2.0 * std::sqrt(kPi) * std::pow(d, 1.5)) * std::exp(-x * x / (4.0 * d));
    };
    u += gauss_kronrod<double, 61>::integrate(g, 0.0, t, 12, 1e-13);
  }
  return u;
}

GridSolution crank_nicolson(const BoundaryData& data, double length, double h, double dt, double t_end,
                            int euler_steps) {
  GridSolution out;
  out.h = h;
  out.dt = dt;
  const auto N = static_cast<Eigen::Index>(std::llround(length / h));
  const auto steps = static_cast<long>(std::llround(t_end / dt));
  Eigen::VectorXd u(N + 1);
  for (Eigen::Index i = 0; i <= N; ++i) u(i) = data.phi(static_cast<double>(i) * h, 0);
  u(0) = data.psi(0.0, 0);
  u(N) = 0.0;
  out.times.push_back(0.0);
  out.u.push_back(u);

  // theta-scheme on interior nodes 1..N-1.
  auto advance = [&](double t0, double k, double theta) {
    const double r = k / (h * h);
    const Eigen::Index m = N - 1;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 1; i < N; ++i) {
      const Eigen::Index row = i - 1;
      trip.emplace_back(row, row, 1.0 + 2.0 * theta * r);
      if (i > 1) trip.emplace_back(row, row - 1, -theta * r);
      if (i < N - 1) trip.emplace_back(row, row + 1, -theta * r);
      rhs(row) = u(i) + (1.0 - theta) * r * (u(i - 1) - 2.0 * u(i) + u(i + 1));
    }
    const double left = data.psi(t0 + k, 0);
    rhs(0) += theta * r * left;
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    u.segment(1, m) = lu.solve(rhs);
    u(0) = left;
  };

  double t = 0.0;
  for (long n = 0; n < steps; ++n) {
    if (n < (euler_steps + 1) / 2) {
      advance(t, 0.5 * dt, 1.0);
      advance(t + 0.5 * dt, 0.5 * dt, 1.0);
    } else {
      advance(t, dt, 0.5);
    }
    t = static_cast<double>(n + 1) * dt;
    out.times.push_back(t);
    out.u.push_back(u);
  }
  return out;
}

LiftedSmoothness lifted_smoothness(const MixedSolution& sol, double tau_min, double tau_max, double s_max,
                                   int tau_samples, int s_samples) {
  LiftedSmoothness ls;
  const double ds = 1e-2, dl = 1e-2;
  // One time level at a time so the correction rows are reused across s.
  auto profile = [&](double tau, const std::vector<double>& ss) {
    std::vector<double> out;
    out.reserve(ss.size());
    for (double s : ss) out.push_back(sol.u(0.5 * tau * tau, s * tau));
    return out;
  };
  std::vector<double> ss, lo, hi;
  for (int b = 0; b < s_samples; ++b) {
    const double s = s_max * b / (s_samples - 1);
    ss.push_back(s);
    lo.push_back(s < ds ? s : s - ds);
    hi.push_back(s + ds);
  }
  for (int a = 0; a < tau_samples; ++a) {
    const double tau = tau_min * std::pow(tau_max / tau_min, static_cast<double>(a) / (tau_samples - 1));
    const double tau_hi = std::min(tau * (1 + dl), std::sqrt(2.0 * sol.options().t_max));
    const double tau_lo = tau * (1 - dl);
    const auto u_lo = profile(tau, lo), u_hi = profile(tau, hi);
    const auto v_hi = profile(tau_hi, ss), v_lo = profile(tau_lo, ss);
    for (std::size_t b = 0; b < ss.size(); ++b) {
      const double us = (u_hi[b] - u_lo[b]) / (hi[b] - lo[b]);
      const double ut = (v_hi[b] - v_lo[b]) / (std::log(tau_hi) - std::log(tau_lo));
      ls.sup_ds = std::max(ls.sup_ds, std::abs(us));
      ls.sup_tau_dtau = std::max(ls.sup_tau_dtau, std::abs(ut));
    }
  }
  return ls;
}

void write_field_csv(std::ostream& out, const MixedSolution& sol, const std::vector<double>& times,
                     const std::vector<double>& xs) {
  out << "t,x,u,v,w,defect\n";
  for (double t : times)
    for (double x : xs) {
      const double v = sol.v(t, x), w = sol.w(t, x);
      out << t << ',' << x << ',' << v - w << ',' << v << ',' << w << ',' << sol.defect(t, x) << '\n';
    }
}

}  // namespace netflow
