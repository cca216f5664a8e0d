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

// Truncated Fourier lattice and Hermitian spectral fields on the torus
// [0, 2pi)^2 with normalized Haar measure, so e_k(x) = exp(i k.x) is
// orthonormal and a field is omega(x) = sum_k omega_k e_k(x).

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <compare>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

namespace stocheuler {

using Complex = std::complex<double>;

/// A nonzero wavevector k in Z^2.
struct ModeIndex {
  int kx = 0;
  int ky = 0;

  constexpr ModeIndex operator-() const noexcept { return {-kx, -ky}; }
  constexpr ModeIndex operator+(ModeIndex o) const noexcept { return {kx + o.kx, ky + o.ky}; }
  constexpr ModeIndex operator-(ModeIndex o) const noexcept { return {kx - o.kx, ky - o.ky}; }
  constexpr auto operator<=>(const ModeIndex&) const = default;

  constexpr int norm_inf() const noexcept { return std::max(kx < 0 ? -kx : kx, ky < 0 ? -ky : ky); }
  constexpr int norm_sq() const noexcept { return kx * kx + ky * ky; }
  double norm() const noexcept { return std::sqrt(static_cast<double>(norm_sq())); }
  constexpr bool is_zero() const noexcept { return kx == 0 && ky == 0; }

  /// k^perp = (k2, -k1), matching grad^perp = (d2, -d1).
  constexpr ModeIndex perp() const noexcept { return {ky, -kx}; }
  constexpr int dot(ModeIndex o) const noexcept { return kx * o.kx + ky * o.ky; }

  /// Representative rule for conjugate pairs: kx > 0, or kx == 0 and ky > 0.
  constexpr bool in_upper_half() const noexcept { return kx > 0 || (kx == 0 && ky > 0); }

  std::string to_string() const {
    return "(" + std::to_string(kx) + "," + std::to_string(ky) + ")";
  }
};

/// The mode set {k != 0 : |k|_inf <= N} in lexicographic (kx, ky) order.
///
/// Lexicographic order is reversed by k -> -k, so the mirror of index i is
/// size() - 1 - i and the upper half-lattice is exactly the second half of
/// the sequence.
class ModeLattice {
 public:
  explicit ModeLattice(int cutoff) : cutoff_(cutoff) {
    if (cutoff < 1) {
      throw std::invalid_argument("lattice cutoff N must be >= 1, got " + std::to_string(cutoff));
    }
    const int side = 2 * cutoff + 1;
    modes_.reserve(static_cast<std::size_t>(side * side - 1));
    for (int kx = -cutoff; kx <= cutoff; ++kx) {
      for (int ky = -cutoff; ky <= cutoff; ++ky) {
        if (kx == 0 && ky == 0) continue;
        modes_.push_back({kx, ky});
      }
    }
  }

  int cutoff() const noexcept { return cutoff_; }
  std::size_t size() const noexcept { return modes_.size(); }
  std::size_t half_size() const noexcept { return modes_.size() / 2; }

  std::span<const ModeIndex> modes() const noexcept { return modes_; }
  std::span<const ModeIndex> half() const noexcept {
    return std::span<const ModeIndex>(modes_).subspan(half_size());
  }
  ModeIndex mode(std::size_t i) const { return modes_.at(i); }
  ModeIndex half_mode(std::size_t j) const { return modes_.at(half_size() + j); }

  bool contains(ModeIndex k) const noexcept { return !k.is_zero() && k.norm_inf() <= cutoff_; }

  std::optional<std::size_t> find(ModeIndex k) const noexcept {
    if (!contains(k)) return std::nullopt;
    const int side = 2 * cutoff_ + 1;
    const int raw = (k.kx + cutoff_) * side + (k.ky + cutoff_);
    const int centre = cutoff_ * side + cutoff_;
    return static_cast<std::size_t>(raw < centre ? raw : raw - 1);
  }

  std::size_t index_of(ModeIndex k) const {
    if (auto i = find(k)) return *i;
    throw std::out_of_range("mode " + k.to_string() + " not in lattice N=" + std::to_string(cutoff_));
  }

  std::size_t mirror(std::size_t i) const noexcept { return modes_.size() - 1 - i; }
  bool is_half_index(std::size_t i) const noexcept { return i >= half_size(); }

  /// Position within half() of the representative of mode i or its mirror.
  std::size_t half_slot(std::size_t i) const noexcept {
    return is_half_index(i) ? i - half_size() : mirror(i) - half_size();
  }

  bool operator==(const ModeLattice& o) const noexcept { return cutoff_ == o.cutoff_; }

 private:
  int cutoff_;
  std::vector<ModeIndex> modes_;
};

using LatticePtr = std::shared_ptr<const ModeLattice>;

inline LatticePtr build_lattice(int cutoff) { return std::make_shared<const ModeLattice>(cutoff); }

/// Fourier coefficients of a real field on a ModeLattice.
///
/// Only the upper half-lattice is stored; coefficients of the lower half are
/// read as conjugates, so Hermitian symmetry holds bit-exactly by construction.
class SpectralField {
 public:
  explicit SpectralField(LatticePtr lattice)
      : lattice_(std::move(lattice)), half_(lattice_->half_size()) {}

  static SpectralField from_half(LatticePtr lattice, std::vector<Complex> half) {
    if (half.size() != lattice->half_size()) {
      throw std::invalid_argument("half-lattice coefficient count mismatch");
    }
    SpectralField f(std::move(lattice));
    f.half_ = std::move(half);
    return f;
  }

  const ModeLattice& lattice() const noexcept { return *lattice_; }
  const LatticePtr& lattice_ptr() const noexcept { return lattice_; }
  std::size_t size() const noexcept { return lattice_->size(); }

  Complex operator[](std::size_t i) const noexcept {
    const std::size_t h = lattice_->half_size();
    return i >= h ? half_[i - h] : std::conj(half_[lattice_->mirror(i) - h]);
  }
  Complex at(ModeIndex k) const { return (*this)[lattice_->index_of(k)]; }

  /// Sets mode i to z and its mirror to conj(z).
  void set(std::size_t i, Complex z) {
    const std::size_t h = lattice_->half_size();
    if (i >= h) {
      half_.at(i - h) = z;
    } else {
      half_.at(lattice_->mirror(i) - h) = std::conj(z);
    }
  }
  void set(ModeIndex k, Complex z) { set(lattice_->index_of(k), z); }

  std::span<const Complex> half() const noexcept { return half_; }
  std::span<Complex> half() noexcept { return half_; }

  std::vector<Complex> full() const {
    std::vector<Complex> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)[i];
    return out;
  }

  SpectralField& operator*=(double c) noexcept {
    for (auto& z : half_) z *= c;
    return *this;
  }

  bool operator==(const SpectralField& o) const noexcept {
    return *lattice_ == *o.lattice_ && half_ == o.half_;
  }

 private:
  LatticePtr lattice_;
  std::vector<Complex> half_;
};

inline SpectralField operator*(double c, SpectralField f) { return f *= c; }

// ---------------------------------------------------------------------------
// Real chart: coords[2j] = sqrt2 Re xi_{h_j}, coords[2j+1] = sqrt2 Im xi_{h_j}
// over the half lattice h, so |xi|^2_{H_N} = sum coords^2 and the white-noise
// measure becomes the standard Gaussian on R^{|Lambda_N|}.

enum class ChartPart { Real = 0, Imag = 1 };

inline std::size_t chart_index(const ModeLattice& lattice, ModeIndex k, ChartPart part) {
  if (!k.in_upper_half()) {
    throw std::invalid_argument("chart coordinates are indexed by half-lattice modes, got " +
                                k.to_string());
  }
  return 2 * lattice.half_slot(lattice.index_of(k)) + static_cast<std::size_t>(part);
}

inline std::vector<double> to_chart(const SpectralField& field) {
  std::vector<double> coords(2 * field.half().size());
  for (std::size_t j = 0; j < field.half().size(); ++j) {
    coords[2 * j] = std::numbers::sqrt2 * field.half()[j].real();
    coords[2 * j + 1] = std::numbers::sqrt2 * field.half()[j].imag();
  }
  return coords;
}

inline SpectralField from_chart(LatticePtr lattice, std::span<const double> coords) {
  if (coords.size() != lattice->size()) {
    throw std::invalid_argument("chart dimension must equal |Lambda_N|");
  }
  std::vector<Complex> half(lattice->half_size());
  for (std::size_t j = 0; j < half.size(); ++j) {
    half[j] = {coords[2 * j] * (std::numbers::sqrt2 / 2), coords[2 * j + 1] * (std::numbers::sqrt2 / 2)};
  }
  return SpectralField::from_half(std::move(lattice), std::move(half));
}

// ---------------------------------------------------------------------------
// Norms.

/// sum over the full lattice of |omega_k|^2 (twice the enstrophy).
inline double hnorm_sq(const SpectralField& field) noexcept {
  double s = 0.0;
  for (const Complex& z : field.half()) s += std::norm(z);
  return 2.0 * s;
}

/// (sum_k |k|^{2s} |omega_k|^2)^{1/2}.
inline double sobolev_norm(const SpectralField& field, double s) {
  const auto& lat = field.lattice();
  double acc = 0.0;
  for (std::size_t j = 0; j < lat.half_size(); ++j) {
    const double k2 = lat.half_mode(j).norm_sq();
    acc += std::pow(k2, s) * std::norm(field.half()[j]);
  }
  return std::sqrt(2.0 * acc);
}

/// H_N inner product sum_k a_k conj(b_k); real for Hermitian fields.
inline double inner(const SpectralField& a, const SpectralField& b) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < a.half().size(); ++j) {
    s += a.half()[j].real() * b.half()[j].real() + a.half()[j].imag() * b.half()[j].imag();
  }
  return 2.0 * s;
}

// ---------------------------------------------------------------------------
// Biot-Savart law.
//
// With G the Green function of the Laplacian (G_k = -1/|k|^2) and
// K = -grad^perp G, grad^perp = (d2, -d1), one gets K_k = i k^perp / |k|^2 and
// u_k = i k^perp omega_k / |k|^2 with k^perp = (k2, -k1). The scalar curl
// d1 u2 - d2 u1 of this u returns omega.

struct Velocity {
  SpectralField u1;
  SpectralField u2;
};

namespace detail {

// Rounds v to `bits` significant bits.
inline double round_to_bits(double v, int bits) noexcept {
  if (v == 0.0 || !std::isfinite(v)) return v;
  int e = 0;
  std::frexp(v, &e);
  const double scale = std::ldexp(1.0, bits - e);
  return std::nearbyint(v * scale) / scale;
}

}  // namespace detail

inline Velocity biot_savart(const SpectralField& field) {
  const auto& lat = field.lattice();
  // The common factor i omega_k / |k|^2 is rounded so that multiplying it by
  // k1, k2 and by k1 k2 is exact; then k.u_k vanishes identically in floating
  // point instead of only up to round-off.
  const int reserve_bits = 2 * static_cast<int>(std::bit_width(static_cast<unsigned>(lat.cutoff())));
  const int keep_bits = 53 - reserve_bits;
  std::vector<Complex> h1(lat.half_size()), h2(lat.half_size());
  for (std::size_t j = 0; j < lat.half_size(); ++j) {
    const ModeIndex k = lat.half_mode(j);
    const Complex w = Complex(0.0, 1.0) * field.half()[j] / static_cast<double>(k.norm_sq());
    const Complex wr(detail::round_to_bits(w.real(), keep_bits),
                     detail::round_to_bits(w.imag(), keep_bits));
    const ModeIndex kp = k.perp();
    h1[j] = static_cast<double>(kp.kx) * wr;
    h2[j] = static_cast<double>(kp.ky) * wr;
  }
  return {SpectralField::from_half(field.lattice_ptr(), std::move(h1)),
          SpectralField::from_half(field.lattice_ptr(), std::move(h2))};
}

/// k . u_k at every lattice mode (zero for Biot-Savart output).
inline double max_velocity_divergence(const Velocity& u) {
  const auto& lat = u.u1.lattice();
  double worst = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const ModeIndex k = lat.mode(i);
    const Complex d = static_cast<double>(k.kx) * u.u1[i] + static_cast<double>(k.ky) * u.u2[i];
    worst = std::max(worst, std::abs(d));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Physical-space evaluation on the uniform M x M grid x = 2pi (i, j) / M.

template <class T>
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::size_t n, T fill = T{}) : n_(n), data_(n * n, fill) {}
  std::size_t size() const noexcept { return n_; }
  T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

 private:
  std::size_t n_ = 0;
  std::vector<T> data_;
};

/// Above this many (grid points x modes) the FFT path is used.
inline constexpr std::size_t kDirectSummationLimit = 10'000;

enum class GridMethod { Automatic, Direct, Fft };

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline std::size_t wrap_index(int k, std::size_t m) noexcept {
  const int mi = static_cast<int>(m);
  return static_cast<std::size_t>(((k % mi) + mi) % mi);
}

inline Grid<Complex> evaluate_direct(const SpectralField& field, std::size_t m) {
  const auto& lat = field.lattice();
  std::vector<Complex> cis(m);
  for (std::size_t p = 0; p < m; ++p) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(p) / static_cast<double>(m);
    cis[p] = {std::cos(a), std::sin(a)};
  }
  Grid<Complex> out(m);
  const auto coeffs = field.full();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      Complex acc{};
      for (std::size_t q = 0; q < lat.size(); ++q) {
        const ModeIndex k = lat.mode(q);
        const long phase = static_cast<long>(k.kx) * static_cast<long>(i) +
                           static_cast<long>(k.ky) * static_cast<long>(j);
        const long mm = static_cast<long>(m);
        acc += coeffs[q] * cis[static_cast<std::size_t>(((phase % mm) + mm) % mm)];
      }
      out(i, j) = acc;
    }
  }
  return out;
}

inline Grid<Complex> evaluate_fft(const SpectralField& field, std::size_t m) {
  const auto& lat = field.lattice();
  const std::size_t total = m * m;
  auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
  if (in == nullptr || out == nullptr) {
    fftw_free(in);
    fftw_free(out);
    throw std::bad_alloc();
  }
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(m), static_cast<int>(m), in, out, FFTW_BACKWARD,
                            FFTW_ESTIMATE);
  }
  for (std::size_t p = 0; p < total; ++p) in[p][0] = in[p][1] = 0.0;
  for (std::size_t q = 0; q < lat.size(); ++q) {
    const ModeIndex k = lat.mode(q);
    const Complex z = field[q];
    const std::size_t slot = wrap_index(k.kx, m) * m + wrap_index(k.ky, m);
    in[slot][0] = z.real();
    in[slot][1] = z.imag();
  }
  fftw_execute(plan);
  Grid<Complex> result(m);
  for (std::size_t p = 0; p < total; ++p) result.values()[p] = {out[p][0], out[p][1]};
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return result;
}

}  // namespace detail

/// Pointwise sum_k omega_k e^{i k.x}, including the (round-off) imaginary part.
inline Grid<Complex> evaluate_on_grid_complex(const SpectralField& field, std::size_t grid_size,
                                              GridMethod method = GridMethod::Automatic) {
  const std::size_t minimum = 2 * static_cast<std::size_t>(field.lattice().cutoff()) + 1;
  if (grid_size < minimum) {
    throw std::invalid_argument("grid size " + std::to_string(grid_size) +
                                " aliases represented modes; need >= " + std::to_string(minimum));
  }
  if (method == GridMethod::Automatic) {
    method = grid_size * grid_size * field.size() < kDirectSummationLimit ? GridMethod::Direct
                                                                          : GridMethod::Fft;
  }
  return method == GridMethod::Direct ? detail::evaluate_direct(field, grid_size)
                                      : detail::evaluate_fft(field, grid_size);
}

inline Grid<double> evaluate_on_grid(const SpectralField& field, std::size_t grid_size,
                                     GridMethod method = GridMethod::Automatic) {
  const auto c = evaluate_on_grid_complex(field, grid_size, method);
  Grid<double> out(grid_size);
  for (std::size_t p = 0; p < c.values().size(); ++p) out.values()[p] = c.values()[p].real();
  return out;
}

/// Mean of squared grid values (the L^2 norm under normalized Haar measure).
inline double grid_mean_square(const Grid<double>& g) {
  double s = 0.0;
  for (double v : g.values()) s += v * v;
  return s / static_cast<double>(g.values().size());
}

}  // namespace stocheuler
