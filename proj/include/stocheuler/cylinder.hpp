// Copyright 2026 The stocheuler Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace stocheuler {

/// Polynomial test functional of total degree <= 4 in real-chart coordinates.
///
/// Derivatives, the Ornstein-Uhlenbeck action L psi = Lap psi - <x, grad psi>
/// and the Mehler semigroup are all computed symbolically, so they are exact
/// up to the final floating-point evaluation.
class CylinderFunction {
 public:
  /// Sorted (coordinate, power) pairs with power >= 1; empty is the constant 1.
  using Monomial = std::vector<std::pair<std::size_t, int>>;
  static constexpr int kMaxDegree = 4;

  CylinderFunction() = default;

  static CylinderFunction constant(double c) {
    CylinderFunction f;
    f.add_term({}, c);
    return f;
  }
  static CylinderFunction coordinate(std::size_t j, double c = 1.0) {
    CylinderFunction f;
    f.add_term({{j, 1}}, c);
    return f;
  }
  static CylinderFunction monomial(Monomial m, double c = 1.0) {
    CylinderFunction f;
    f.add_term(normalized(std::move(m)), c);
    return f;
  }

  const std::map<Monomial, double>& terms() const noexcept { return terms_; }

  int degree() const noexcept {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, degree_of(m));
    return d;
  }

  std::vector<std::size_t> support() const {
    std::set<std::size_t> s;
    for (const auto& [m, c] : terms_) {
      for (const auto& [j, p] : m) s.insert(j);
    }
    return {s.begin(), s.end()};
  }

  bool is_constant() const noexcept { return degree() == 0; }

  double operator()(std::span<const double> x) const {
    double total = 0.0;
    for (const auto& [m, c] : terms_) total += c * evaluate_monomial(m, x);
    return total;
  }

  CylinderFunction derivative(std::size_t j) const {
    CylinderFunction out;
    for (const auto& [m, c] : terms_) {
      for (std::size_t q = 0; q < m.size(); ++q) {
        if (m[q].first != j) continue;
        Monomial d = m;
        const int p = d[q].second;
        if (--d[q].second == 0) d.erase(d.begin() + static_cast<std::ptrdiff_t>(q));
        out.add_term(std::move(d), c * p);
      }
    }
    return out;
  }

  /// Sparse gradient (coordinate, value) over the support.
  std::vector<std::pair<std::size_t, double>> gradient(std::span<const double> x) const {
    std::vector<std::pair<std::size_t, double>> g;
    for (const std::size_t j : support()) g.emplace_back(j, derivative(j)(x));
    return g;
  }

  CylinderFunction laplacian() const {
    CylinderFunction out;
    for (const std::size_t j : support()) out += derivative(j).derivative(j);
    return out;
  }

  /// L psi = Lap psi - sum_j x_j d_j psi.
  CylinderFunction ou_action() const {
    CylinderFunction out = laplacian();
    for (const auto& [m, c] : terms_) {
      const int d = degree_of(m);
      if (d > 0) out.add_term(m, -c * d);
    }
    return out;
  }

  /// P_t psi(x) = E psi(e^{-t} x + sqrt(1 - e^{-2t}) Z), Z standard Gaussian.
  CylinderFunction mehler(double t) const {
    if (t < 0.0) throw std::invalid_argument("Mehler time must be >= 0");
    const double decay = std::exp(-t);
    const double spread = std::sqrt(-std::expm1(-2.0 * t));
    CylinderFunction out;
    for (const auto& [m, c] : terms_) {
      // Product over coordinates of E (decay x + spread Z)^p, expanded.
      CylinderFunction prod = constant(c);
      for (const auto& [j, p] : m) {
        CylinderFunction factor;
        for (int q = 0; q <= p; q += 2) {
          // choose q powers of Z: binom(p, q) decay^{p-q} spread^q E Z^q
          const double coeff = binomial(p, q) * std::pow(decay, p - q) * std::pow(spread, q) *
                               gaussian_moment(q);
          factor.add_term(p - q > 0 ? Monomial{{j, p - q}} : Monomial{}, coeff);
        }
        prod = prod * factor;
      }
      out += prod;
    }
    return out;
  }

  CylinderFunction& operator+=(const CylinderFunction& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  friend CylinderFunction operator+(CylinderFunction a, const CylinderFunction& b) { return a += b; }
  friend CylinderFunction operator*(double s, CylinderFunction f) {
    for (auto& [m, c] : f.terms_) c *= s;
    return f;
  }
  friend CylinderFunction operator*(const CylinderFunction& a, const CylinderFunction& b) {
    CylinderFunction out;
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) {
        Monomial m = ma;
        m.insert(m.end(), mb.begin(), mb.end());
        out.add_term(normalized(std::move(m)), ca * cb);
      }
    }
    return out;
  }

 private:
  static int degree_of(const Monomial& m) noexcept {
    int d = 0;
    for (const auto& [j, p] : m) d += p;
    return d;
  }

  static Monomial normalized(Monomial m) {
    std::map<std::size_t, int> acc;
    for (const auto& [j, p] : m) {
      if (p < 0) throw std::invalid_argument("negative monomial power");
      if (p > 0) acc[j] += p;
    }
    return {acc.begin(), acc.end()};
  }

  static double evaluate_monomial(const Monomial& m, std::span<const double> x) {
    double v = 1.0;
    for (const auto& [j, p] : m) {
      if (j >= x.size()) throw std::out_of_range("cylinder function coordinate outside chart");
      for (int q = 0; q < p; ++q) v *= x[j];
    }
    return v;
  }

  static double binomial(int n, int k) noexcept {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  // E Z^q = (q - 1)!! for even q.
  static double gaussian_moment(int q) noexcept {
    double r = 1.0;
    for (int i = q - 1; i > 0; i -= 2) r *= i;
    return r;
  }

  void add_term(Monomial m, double c) {
    if (degree_of(m) > kMaxDegree) {
      throw std::invalid_argument("cylinder functions are limited to total degree 4");
    }
    auto [it, inserted] = terms_.try_emplace(std::move(m), c);
    if (!inserted) it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }

  std::map<Monomial, double> terms_;
};

}  // namespace stocheuler
