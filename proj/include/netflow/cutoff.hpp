#pragma once

#include "netflow/polynomial.hpp"

#include <cmath>
#include <vector>

namespace netflow {

/// Smooth step: 1 for r <= a, 0 for r >= b, polynomial of class C^n between.
/// Every derivative is available in closed form.
class Cutoff {
 public:
  Cutoff() : Cutoff(0.5, 1.0) {}
  Cutoff(double a, double b, int smoothness = 10) : a_(a), b_(b) {
    // S(u) = integral of u^n (1-u)^n, normalized to S(1) = 1.
    const int n = smoothness;
    Polynomial<double> integrand = Polynomial<double>::constant(1.0);
    const Polynomial<double> u = Polynomial<double>::monomial(1, 1.0);
    const Polynomial<double> one_minus = Polynomial<double>::constant(1.0) - u;
    for (int i = 0; i < n; ++i) integrand = integrand * u * one_minus;
    std::vector<double> c(static_cast<std::size_t>(integrand.degree()) + 2, 0.0);
    for (int k = 0; k <= integrand.degree(); ++k) c[static_cast<std::size_t>(k) + 1] = integrand.coeff(k) / (k + 1);
    Polynomial<double> s(std::move(c));
    s *= 1.0 / s(1.0);
    for (int k = 0; k <= s.degree() + 1; ++k) d_.push_back(s.derivative(k));
  }

  double a() const { return a_; }
  double b() const { return b_; }

  /// k-th derivative at r.
  double operator()(double r, int k = 0) const {
    if (r <= a_) return k == 0 ? 1.0 : 0.0;
    if (r >= b_) return 0.0;
    if (k >= static_cast<int>(d_.size())) return 0.0;
    const double w = b_ - a_;
    const double u = (r - a_) / w;
    const double v = d_[static_cast<std::size_t>(k)](u) / std::pow(w, k);
    return k == 0 ? 1.0 - v : -v;
  }

 private:
  double a_, b_;
  std::vector<Polynomial<double>> d_;
};

}  // namespace netflow
