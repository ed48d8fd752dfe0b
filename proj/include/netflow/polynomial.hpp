#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

namespace netflow {

/// Dense univariate polynomial, coefficients stored lowest degree first.
/// Scalar may be double or an exact rational type (mpq_class).
template <typename Scalar>
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<Scalar> coeffs) : c_(std::move(coeffs)) { trim(); }

  static Polynomial constant(const Scalar& a) { return Polynomial(std::vector<Scalar>{a}); }
  static Polynomial monomial(int degree, const Scalar& a) {
    std::vector<Scalar> c(static_cast<std::size_t>(degree) + 1, Scalar(0));
    c.back() = a;
    return Polynomial(std::move(c));
  }

  /// Degree of the zero polynomial is -1.
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }

  Scalar coeff(int k) const {
    if (k < 0 || k > degree()) return Scalar(0);
    return c_[static_cast<std::size_t>(k)];
  }
  void set_coeff(int k, const Scalar& a) {
    if (k > degree()) c_.resize(static_cast<std::size_t>(k) + 1, Scalar(0));
    c_[static_cast<std::size_t>(k)] = a;
    trim();
  }
  const std::vector<Scalar>& coeffs() const { return c_; }

  template <typename T>
  T operator()(const T& x) const {
    T acc = T(0);
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + T(*it);
    return acc;
  }

  Polynomial derivative(int order = 1) const {
    Polynomial p = *this;
    for (int o = 0; o < order; ++o) {
      if (p.c_.size() <= 1) return Polynomial();
      std::vector<Scalar> d(p.c_.size() - 1);
      for (std::size_t k = 1; k < p.c_.size(); ++k) d[k - 1] = p.c_[k] * Scalar(static_cast<long>(k));
      p = Polynomial(std::move(d));
    }
    return p;
  }

  /// True when only even (parity 0) or only odd (parity 1) powers appear.
  bool has_parity(int parity) const {
    for (int k = 0; k <= degree(); ++k)
      if ((k % 2) != parity && coeff(k) != Scalar(0)) return false;
    return true;
  }

  Polynomial& operator+=(const Polynomial& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), Scalar(0));
    for (std::size_t k = 0; k < o.c_.size(); ++k) c_[k] += o.c_[k];
    trim();
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), Scalar(0));
    for (std::size_t k = 0; k < o.c_.size(); ++k) c_[k] -= o.c_[k];
    trim();
    return *this;
  }
  Polynomial& operator*=(const Scalar& a) {
    for (auto& x : c_) x *= a;
    trim();
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator-(Polynomial a) { return a *= Scalar(-1); }
  friend Polynomial operator*(Polynomial a, const Scalar& s) { return a *= s; }
  friend Polynomial operator*(const Scalar& s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) return Polynomial();
    std::vector<Scalar> r(a.c_.size() + b.c_.size() - 1, Scalar(0));
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
    return Polynomial(std::move(r));
  }
  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.c_ == b.c_; }

 private:
  void trim() {
    while (!c_.empty() && c_.back() == Scalar(0)) c_.pop_back();
  }
  std::vector<Scalar> c_;
};

/// Plane-valued polynomial: one polynomial per coordinate.
template <typename Scalar>
struct VecPoly {
  std::array<Polynomial<Scalar>, 2> comp;

  int degree() const { return std::max(comp[0].degree(), comp[1].degree()); }
  VecPoly derivative(int order = 1) const { return {{comp[0].derivative(order), comp[1].derivative(order)}}; }
  bool has_parity(int parity) const { return comp[0].has_parity(parity) && comp[1].has_parity(parity); }

  friend VecPoly operator+(const VecPoly& a, const VecPoly& b) { return {{a.comp[0] + b.comp[0], a.comp[1] + b.comp[1]}}; }
  friend VecPoly operator-(const VecPoly& a, const VecPoly& b) { return {{a.comp[0] - b.comp[0], a.comp[1] - b.comp[1]}}; }
  friend VecPoly operator*(const Polynomial<Scalar>& p, const VecPoly& v) { return {{p * v.comp[0], p * v.comp[1]}}; }
  friend VecPoly operator*(const Scalar& a, const VecPoly& v) { return {{a * v.comp[0], a * v.comp[1]}}; }
  friend bool operator==(const VecPoly& a, const VecPoly& b) { return a.comp == b.comp; }
};

template <typename Scalar>
Polynomial<Scalar> dot(const VecPoly<Scalar>& a, const VecPoly<Scalar>& b) {
  return a.comp[0] * b.comp[0] + a.comp[1] * b.comp[1];
}

}  // namespace netflow
