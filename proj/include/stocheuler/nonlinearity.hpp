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

// The symmetrized kernel
//
//   H_phi(x, y) = 1/2 (grad phi(x) - grad phi(y)) . K(x - y),
//
// its Fourier-truncated approximants H^n_phi (K replaced by
// K_n(z) = sum_{0 < |k|_inf <= n} i k^perp / |k|^2 e^{i k.z}), and the pairing
// <omega (x) omega, H_phi> = <(K * omega) omega, grad phi>.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stocheuler/measures.hpp"
#include "stocheuler/parallel.hpp"
#include "stocheuler/random.hpp"
#include "stocheuler/spectral.hpp"
#include "stocheuler/stats.hpp"

namespace stocheuler {

using Point = std::array<double, 2>;

/// A real trigonometric polynomial, stored by its upper half-lattice
/// coefficients; phi_{-k} = conj(phi_k) is implied.
class TestFunction {
 public:
  TestFunction() = default;

  /// phi = amplitude (e_m + e_{-m}) = 2 amplitude cos(m . x).
  static TestFunction cosine(ModeIndex m, double amplitude = 1.0) {
    TestFunction f;
    f.set(m, amplitude);
    return f;
  }

  /// Sets phi_k (and phi_{-k} = conj); k may lie in either half.
  void set(ModeIndex k, Complex value) {
    if (k.is_zero()) throw std::invalid_argument("test functions carry no k = 0 mode");
    if (!k.in_upper_half()) {
      k = -k;
      value = std::conj(value);
    }
    if (value == Complex{}) {
      coeffs_.erase(k);
    } else {
      coeffs_[k] = value;
    }
  }

  Complex coeff(ModeIndex k) const {
    const bool upper = k.in_upper_half();
    const auto it = coeffs_.find(upper ? k : -k);
    if (it == coeffs_.end()) return {};
    return upper ? it->second : std::conj(it->second);
  }

  const std::map<ModeIndex, Complex>& half_coeffs() const noexcept { return coeffs_; }

  /// All (k, phi_k) over both halves.
  std::vector<std::pair<ModeIndex, Complex>> full_coeffs() const {
    std::vector<std::pair<ModeIndex, Complex>> out;
    for (const auto& [k, c] : coeffs_) {
      out.emplace_back(k, c);
      out.emplace_back(-k, std::conj(c));
    }
    return out;
  }

  int max_norm_inf() const noexcept {
    int m = 0;
    for (const auto& [k, c] : coeffs_) m = std::max(m, k.norm_inf());
    return m;
  }

  /// sum_k (1 + |k|^2) |phi_k|, an upper bound for the C^2 norm.
  double c2_norm() const noexcept {
    double s = 0.0;
    for (const auto& [k, c] : coeffs_) s += 2.0 * (1.0 + k.norm_sq()) * std::abs(c);
    return s;
  }

  double value(Point x) const noexcept {
    double s = 0.0;
    for (const auto& [k, c] : coeffs_) {
      s += 2.0 * (c * std::polar(1.0, k.kx * x[0] + k.ky * x[1])).real();
    }
    return s;
  }

  /// grad phi(x) = -2 sum_half k Im(phi_k e^{i k.x}).
  Point gradient(Point x) const noexcept {
    Point g{0.0, 0.0};
    for (const auto& [k, c] : coeffs_) {
      const double im = (c * std::polar(1.0, k.kx * x[0] + k.ky * x[1])).imag();
      g[0] -= 2.0 * k.kx * im;
      g[1] -= 2.0 * k.ky * im;
    }
    return g;
  }

  bool operator==(const TestFunction&) const = default;

 private:
  std::map<ModeIndex, Complex> coeffs_;
};

struct KernelSpec {
  TestFunction phi;
  std::optional<int> regularization_order;
  std::size_t grid_size = 32;

  int order() const {
    if (!regularization_order) {
      throw std::invalid_argument("kernel evaluation needs a regularization order; K diverges at the diagonal");
    }
    if (*regularization_order < 1) throw std::invalid_argument("regularization order must be >= 1");
    return *regularization_order;
  }
};

namespace detail {

// sin evaluated so that odd_sin(-t) == -odd_sin(t) bit for bit.
inline double odd_sin(double t) noexcept { return t < 0.0 ? -std::sin(-t) : std::sin(t); }

// Upper half of {0 < |k|_inf <= n}.
inline std::vector<ModeIndex> half_box(int n) {
  std::vector<ModeIndex> out;
  for (int kx = 0; kx <= n; ++kx) {
    for (int ky = -n; ky <= n; ++ky) {
      const ModeIndex k{kx, ky};
      if (k.in_upper_half()) out.push_back(k);
    }
  }
  return out;
}

}  // namespace detail

/// K_n(z) = -2 sum_{k in half, |k|_inf <= n} k^perp sin(k.z) / |k|^2.
inline Point truncated_kernel(int n, Point z) {
  Point out{0.0, 0.0};
  for (const ModeIndex k : detail::half_box(n)) {
    const double s = detail::odd_sin(k.kx * z[0] + k.ky * z[1]) / k.norm_sq();
    const ModeIndex kp = k.perp();
    out[0] -= 2.0 * kp.kx * s;
    out[1] -= 2.0 * kp.ky * s;
  }
  return out;
}

inline double eval_kernel(const KernelSpec& spec, Point x, Point y) {
  const int n = spec.order();
  const Point gx = spec.phi.gradient(x);
  const Point gy = spec.phi.gradient(y);
  const Point k = truncated_kernel(n, {x[0] - y[0], x[1] - y[1]});
  return 0.5 * ((gx[0] - gy[0]) * k[0] + (gx[1] - gy[1]) * k[1]);
}

/// <(K * omega) omega, grad phi>
///   = sum_{k, j} (k^perp . (k + j)) / |k|^2 omega_k omega_j conj(phi_{k+j}),
/// optionally keeping only |k|_inf <= order in the Biot-Savart factor.
inline double pairing_spectral(const SpectralField& omega, const TestFunction& phi,
                               std::optional<int> order = std::nullopt) {
  const auto& lat = omega.lattice();
  const auto coeffs = omega.full();
  double total = 0.0;
  for (const auto& [n, phi_n] : phi.full_coeffs()) {
    Complex acc{};
    for (std::size_t a = 0; a < lat.size(); ++a) {
      const ModeIndex k = lat.mode(a);
      if (order && k.norm_inf() > *order) continue;
      const auto b = lat.find(n - k);
      if (!b) continue;
      acc += (static_cast<double>(k.perp().dot(n)) / k.norm_sq()) * coeffs[a] * coeffs[*b];
    }
    total += (acc * std::conj(phi_n)).real();
  }
  return total;
}

namespace detail {

// Values of grad phi on the M x M grid, using exact phase indices.
inline std::array<Grid<double>, 2> gradient_on_grid(const TestFunction& phi, std::size_t m) {
  std::vector<double> sin_table(m), cos_table(m);
  for (std::size_t p = 0; p < m; ++p) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(p) / static_cast<double>(m);
    sin_table[p] = std::sin(a);
    cos_table[p] = std::cos(a);
  }
  std::array<Grid<double>, 2> g{Grid<double>(m), Grid<double>(m)};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      for (const auto& [k, c] : phi.half_coeffs()) {
        const long mm = static_cast<long>(m);
        const long ph = ((static_cast<long>(k.kx) * static_cast<long>(i) + static_cast<long>(k.ky) * static_cast<long>(j)) % mm + mm) % mm;
        const double im = c.real() * sin_table[static_cast<std::size_t>(ph)] +
                          c.imag() * cos_table[static_cast<std::size_t>(ph)];
        g[0](i, j) -= 2.0 * k.kx * im;
        g[1](i, j) -= 2.0 * k.ky * im;
      }
    }
  }
  return g;
}

// K_n on the difference grid, odd under index negation by construction.
inline std::array<Grid<double>, 2> kernel_on_grid(int n, std::size_t m) {
  std::vector<double> sin_table(m);
  for (std::size_t p = 0; p <= m / 2; ++p) {
    sin_table[p] = std::sin(2.0 * std::numbers::pi * static_cast<double>(p) / static_cast<double>(m));
    if (p > 0) sin_table[m - p] = -sin_table[p];
  }
  if (m % 2 == 0) sin_table[m / 2] = 0.0;
  sin_table[0] = 0.0;
  const auto modes = half_box(n);
  std::array<Grid<double>, 2> kg{Grid<double>(m), Grid<double>(m)};
  const long mm = static_cast<long>(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double k0 = 0.0, k1 = 0.0;
      for (const ModeIndex k : modes) {
        const long ph = ((static_cast<long>(k.kx) * static_cast<long>(i) + static_cast<long>(k.ky) * static_cast<long>(j)) % mm + mm) % mm;
        const double s = sin_table[static_cast<std::size_t>(ph)] / k.norm_sq();
        const ModeIndex kp = k.perp();
        k0 -= 2.0 * kp.kx * s;
        k1 -= 2.0 * kp.ky * s;
      }
      kg[0](i, j) = k0;
      kg[1](i, j) = k1;
    }
  }
  return kg;
}

}  // namespace detail

/// Tensor trapezoidal rule for the double integral of omega(x) omega(y) H^n_phi(x, y).
inline double pairing_quadrature(const SpectralField& omega, const KernelSpec& spec) {
  const int n = spec.order();
  const std::size_t m = spec.grid_size;
  const std::size_t minimum = 2 * static_cast<std::size_t>(std::max(omega.lattice().cutoff(), n)) + 1;
  if (m < minimum) {
    throw std::invalid_argument("quadrature grid " + std::to_string(m) + " too coarse; need >= " +
                                std::to_string(minimum));
  }
  const Grid<double> w = evaluate_on_grid(omega, m);
  const auto g = detail::gradient_on_grid(spec.phi, m);
  const auto kg = detail::kernel_on_grid(n, m);
  CompensatedSum total;
  for (std::size_t x1 = 0; x1 < m; ++x1) {
    for (std::size_t x2 = 0; x2 < m; ++x2) {
      const double wx = w(x1, x2);
      const double gx0 = g[0](x1, x2), gx1 = g[1](x1, x2);
      double row = 0.0;
      for (std::size_t y1 = 0; y1 < m; ++y1) {
        const std::size_t d1 = (x1 + m - y1) % m;
        for (std::size_t y2 = 0; y2 < m; ++y2) {
          const std::size_t d2 = (x2 + m - y2) % m;
          const double h = 0.5 * ((gx0 - g[0](y1, y2)) * kg[0](d1, d2) + (gx1 - g[1](y1, y2)) * kg[1](d1, d2));
          row += w(y1, y2) * h;
        }
      }
      total.add(wx * row);
    }
  }
  const double cells = static_cast<double>(m) * static_cast<double>(m);
  return total.value() / (cells * cells);
}

/// Grid estimate of ||H^a_phi - H^b_phi||_{L^2(T^2 x T^2)}; a missing order on
/// one side stands for the zero kernel. The grid is enlarged when needed so
/// that the squared (trigonometric) integrand is integrated exactly.
inline double kernel_l2_distance(const KernelSpec& a, const KernelSpec& b) {
  if (!(a.phi == b.phi)) throw std::invalid_argument("kernel_l2_distance: specs must share phi");
  if (!a.regularization_order && !b.regularization_order) return 0.0;
  const int na = a.regularization_order ? a.order() : 0;
  const int nb = b.regularization_order ? b.order() : 0;
  if (na == nb) return 0.0;
  const int top = std::max(na, nb);
  const std::size_t exact = 2 * static_cast<std::size_t>(top + a.phi.max_norm_inf()) + 1;
  const std::size_t m = std::max({a.grid_size, b.grid_size, exact});
  const auto g = detail::gradient_on_grid(a.phi, m);
  auto ka = na > 0 ? detail::kernel_on_grid(na, m) : std::array<Grid<double>, 2>{Grid<double>(m), Grid<double>(m)};
  const auto kb = nb > 0 ? detail::kernel_on_grid(nb, m) : std::array<Grid<double>, 2>{Grid<double>(m), Grid<double>(m)};
  for (int c = 0; c < 2; ++c) {
    for (std::size_t p = 0; p < m * m; ++p) ka[c].values()[p] -= kb[c].values()[p];
  }
  CompensatedSum total;
  for (std::size_t x1 = 0; x1 < m; ++x1) {
    for (std::size_t x2 = 0; x2 < m; ++x2) {
      double row = 0.0;
      for (std::size_t y1 = 0; y1 < m; ++y1) {
        const std::size_t d1 = (x1 + m - y1) % m;
        for (std::size_t y2 = 0; y2 < m; ++y2) {
          const std::size_t d2 = (x2 + m - y2) % m;
          const double h = 0.5 * ((g[0](x1, x2) - g[0](y1, y2)) * ka[0](d1, d2) +
                                  (g[1](x1, x2) - g[1](y1, y2)) * ka[1](d1, d2));
          row += h * h;
        }
      }
      total.add(row);
    }
  }
  const double cells = static_cast<double>(m) * static_cast<double>(m);
  return std::sqrt(total.value() / (cells * cells));
}

/// ||H^n_phi||_{L^2}.
inline double kernel_l2_norm(const KernelSpec& spec) {
  KernelSpec zero = spec;
  zero.regularization_order.reset();
  return kernel_l2_distance(spec, zero);
}

/// max |H^n_phi(x, y)| / c2_norm over `points` random pairs plus the grid
/// diagonal neighbours.
inline double kernel_sup_ratio(const KernelSpec& spec, RandomSource& rng, std::size_t points) {
  const double c2 = spec.phi.c2_norm();
  if (!(c2 > 0.0)) throw std::invalid_argument("kernel_sup_ratio: phi must be nonzero");
  double worst = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const Point x{2.0 * std::numbers::pi * rng.uniform(), 2.0 * std::numbers::pi * rng.uniform()};
    // Half of the pairs are drawn close to the diagonal where K_n peaks.
    const double r = (i % 2 == 0) ? 2.0 * std::numbers::pi * rng.uniform() : 4.0 * rng.uniform() / spec.order();
    const double a = 2.0 * std::numbers::pi * rng.uniform();
    const Point y{x[0] + r * std::cos(a), x[1] + r * std::sin(a)};
    worst = std::max(worst, std::abs(eval_kernel(spec, x, y)));
  }
  return worst / c2;
}

// ---------------------------------------------------------------------------
// Second-chaos statistics of <omega (x) omega, H^n_phi> under white noise.

struct ChaosQuantity {
  std::string name;
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
};

struct ChaosReport {
  int lattice_cutoff = 0;
  SampleMoments pairing;
  double variance = 0.0;
  double variance_stderr = 0.0;
  double kernel_norm_sq = 0.0;  // ||H^n_phi||^2
  double variance_ratio = 0.0;  // variance / (2 ||H^n_phi||^2)
  double variance_ratio_stderr = 0.0;
  double second_moment = 0.0;
  double fitted_c2 = 0.0;  // E X^2 / c2_norm^2
  double epsilon = 0.0;
  std::vector<double> exp_moments;  // E exp(eps |X|) on nested sample prefixes
  std::vector<std::size_t> exp_prefixes;

  std::vector<ChaosQuantity> quantities() const {
    const std::size_t n = pairing.count;
    std::vector<ChaosQuantity> q{
        {"mean", pairing.mean, pairing.stderr_, n},
        {"variance", variance, variance_stderr, n},
        {"kernel_l2_sq_x2", 2.0 * kernel_norm_sq, 0.0, n},
        {"variance_ratio", variance_ratio, variance_ratio_stderr, n},
        {"second_moment", second_moment, variance_stderr, n},
        {"fitted_c2", fitted_c2, 0.0, n},
    };
    for (std::size_t i = 0; i < exp_moments.size(); ++i) {
      q.push_back({"exp_moment_eps_" + std::to_string(epsilon), exp_moments[i], 0.0, exp_prefixes[i]});
    }
    return q;
  }
};

/// White-noise Monte Carlo on Lambda_N with N = n + max|m|_inf, the smallest
/// lattice on which the second-chaos isometry Var = 2 ||H^n||^2 is exact.
inline ChaosReport chaos_statistics(const KernelSpec& spec, RandomSource& rng, std::size_t samples,
                                    unsigned workers = 1) {
  const int n = spec.order();
  if (samples < 1000) throw std::invalid_argument("chaos_statistics needs at least 1000 samples");
  if (spec.phi.half_coeffs().empty()) throw std::invalid_argument("chaos_statistics: phi must be nonzero");
  ChaosReport rep;
  rep.lattice_cutoff = n + spec.phi.max_norm_inf();
  const LatticePtr lattice = build_lattice(rep.lattice_cutoff);
  const std::uint64_t sub_seed = rng.next_block()[0];
  std::vector<double> x(samples);
  parallel_for(samples, workers, [&](std::size_t i) {
    RandomSource local(sub_seed, i);
    x[i] = pairing_spectral(sample_white_noise(lattice, local), spec.phi, n);
  });

  rep.pairing = sample_moments(x);
  rep.variance = rep.pairing.variance;
  CompensatedSum m2, m4;
  for (double v : x) {
    const double d = v - rep.pairing.mean;
    m2.add(d * d);
    m4.add(d * d * d * d);
  }
  const double count = static_cast<double>(samples);
  const double c2m = m2.value() / count;
  const double c4m = m4.value() / count;
  rep.variance_stderr = std::sqrt(std::max(0.0, c4m - c2m * c2m) / count);

  const double norm = kernel_l2_norm(spec);
  rep.kernel_norm_sq = norm * norm;
  rep.variance_ratio = rep.variance / (2.0 * rep.kernel_norm_sq);
  rep.variance_ratio_stderr = rep.variance_stderr / (2.0 * rep.kernel_norm_sq);

  CompensatedSum sq;
  for (double v : x) sq.add(v * v);
  rep.second_moment = sq.value() / count;
  const double c2 = spec.phi.c2_norm();
  rep.fitted_c2 = rep.second_moment / (c2 * c2);

  rep.epsilon = 0.25 / std::sqrt(std::max(rep.variance, 1e-300));
  for (const std::size_t prefix : {samples / 4, samples / 2, samples}) {
    CompensatedSum e;
    for (std::size_t i = 0; i < prefix; ++i) e.add(std::exp(rep.epsilon * std::abs(x[i])));
    rep.exp_prefixes.push_back(prefix);
    rep.exp_moments.push_back(e.value() / static_cast<double>(prefix));
  }
  return rep;
}

}  // namespace stocheuler
