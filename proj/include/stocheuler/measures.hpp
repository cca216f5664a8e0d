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

// Gaussian measures on H_N: white noise (the enstrophy measure) and the
// energy-enstrophy family with mode variance |k|^2 / (beta + |k|^2).

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stocheuler/random.hpp"
#include "stocheuler/spectral.hpp"

namespace stocheuler {

/// Smallest admissible beta is -1 + kBetaGuard.
inline constexpr double kBetaGuard = 1e-6;

inline void require_admissible_beta(double beta) {
  if (!(beta >= -1.0 + kBetaGuard) || !std::isfinite(beta)) {
    throw std::domain_error("beta must satisfy beta > -1 (guard: beta >= -1 + 1e-6), got " +
                            std::to_string(beta));
  }
}

struct MeasureSpec {
  double beta = 0.0;
  int N = 1;

  void validate() const {
    require_admissible_beta(beta);
    if (N < 1) throw std::invalid_argument("measure cutoff N must be >= 1");
  }

  /// E|omega_k|^2 = |k|^2 / (beta + |k|^2).
  double mode_variance(ModeIndex k) const noexcept {
    const double k2 = k.norm_sq();
    return k2 / (beta + k2);
  }
};

inline SpectralField sample_white_noise(const LatticePtr& lattice, RandomSource& rng) {
  std::vector<Complex> half(lattice->half_size());
  for (auto& z : half) z = rng.complex_normal();
  return SpectralField::from_half(lattice, std::move(half));
}

inline SpectralField sample_energy_enstrophy(const MeasureSpec& spec, const LatticePtr& lattice,
                                             RandomSource& rng) {
  spec.validate();
  std::vector<Complex> half(lattice->half_size());
  for (std::size_t j = 0; j < half.size(); ++j) {
    half[j] = std::sqrt(spec.mode_variance(lattice->half_mode(j))) * rng.complex_normal();
  }
  return SpectralField::from_half(lattice, std::move(half));
}

/// E exp(i <omega, f>) under mu_beta, with <omega, f> = sum_k omega_k conj(f_k).
inline double characteristic_functional(const MeasureSpec& spec, const SpectralField& f) {
  spec.validate();
  const auto& lat = f.lattice();
  double s = 0.0;
  for (std::size_t j = 0; j < lat.half_size(); ++j) {
    s += spec.mode_variance(lat.half_mode(j)) * std::norm(f.half()[j]);
  }
  // half-lattice sum counts each conjugate pair once; the full sum is 2s.
  return std::exp(-s);
}

/// Pairing <omega, f> = integral of omega f dx for real fields on one lattice.
inline double l2_pairing(const SpectralField& omega, const SpectralField& f) {
  return inner(omega, f);
}

/// Half-lattice modes of Z^2 inside the Euclidean ball |k| <= radius.
inline std::vector<ModeIndex> half_ball(double radius) {
  std::vector<ModeIndex> out;
  const int r = static_cast<int>(std::floor(radius));
  for (int kx = 0; kx <= r; ++kx) {
    for (int ky = -r; ky <= r; ++ky) {
      const ModeIndex k{kx, ky};
      if (!k.in_upper_half()) continue;
      if (static_cast<double>(k.norm_sq()) <= radius * radius) out.push_back(k);
    }
  }
  return out;
}

/// Z_{beta,K} = prod_{k in half, |k| <= K} e^{s_k} / (1 + s_k), s_k = beta / |k|^2.
///
/// Under white noise |omega_k|^2 ~ Exp(1) per half mode and
/// E exp(-s (X - 1)) = e^s / (1 + s).
inline double truncated_partition_function(double beta, double wick_cutoff) {
  require_admissible_beta(beta);
  if (!(wick_cutoff >= 1.0)) {
    throw std::invalid_argument("Wick cutoff K must be >= 1");
  }
  double log_z = 0.0;
  for (const ModeIndex k : half_ball(wick_cutoff)) {
    const double s = beta / k.norm_sq();
    log_z += s - std::log1p(s);
  }
  return std::exp(log_z);
}

/// Same product restricted to the half lattice of Lambda_N (the exact
/// normalizer of exp(-beta E_N^c) against mu_N).
inline double lattice_partition_function(double beta, const ModeLattice& lattice) {
  require_admissible_beta(beta);
  double log_z = 0.0;
  for (const ModeIndex k : lattice.half()) {
    const double s = beta / k.norm_sq();
    log_z += s - std::log1p(s);
  }
  return std::exp(log_z);
}

// ---------------------------------------------------------------------------
// Bounded cylinder densities with respect to mu_N.

struct CylinderDensity {
  std::vector<ModeIndex> support;  // half-lattice modes
  /// Receives 2 * support.size() chart coordinates (Re, Im per mode, scaled by sqrt2).
  std::function<double(std::span<const double>)> evaluate;
  /// Upper bound of evaluate().
  double bound = 1.0;
  /// Mass of evaluate() against mu_N; the probability density is evaluate / mass.
  double mass = 1.0;
  std::string descriptor;

  std::vector<double> coordinates(const SpectralField& field) const {
    std::vector<double> c;
    c.reserve(2 * support.size());
    for (const ModeIndex k : support) {
      const Complex z = field.at(k);
      c.push_back(std::numbers::sqrt2 * z.real());
      c.push_back(std::numbers::sqrt2 * z.imag());
    }
    return c;
  }

  double raw(const SpectralField& field) const { return evaluate(coordinates(field)); }
  /// Normalized density value.
  double at(const SpectralField& field) const { return raw(field) / mass; }

  /// Monte Carlo estimate of the mass against the standard Gaussian on the
  /// support coordinates; stores and returns it.
  double normalize(RandomSource& rng, std::size_t samples) {
    double s = 0.0;
    std::vector<double> c(2 * support.size());
    for (std::size_t i = 0; i < samples; ++i) {
      for (std::size_t q = 0; q < c.size(); q += 2) {
        const auto g = rng.standard_normal_pair();
        c[q] = g[0];
        c[q + 1] = g[1];
      }
      s += evaluate(c);
    }
    mass = s / static_cast<double>(samples);
    return mass;
  }
};

/// rho(xi) = 1 + a sin(x) with x the real (or imaginary) chart coordinate of
/// one mode; normalized exactly since sin is odd.
inline CylinderDensity sine_tilt_density(ModeIndex mode, double amplitude,
                                         ChartPart part = ChartPart::Real) {
  if (!mode.in_upper_half()) throw std::invalid_argument("density support must be half-lattice modes");
  if (!(std::abs(amplitude) <= 1.0)) throw std::invalid_argument("sine tilt amplitude must be in [-1, 1]");
  CylinderDensity d;
  d.support = {mode};
  const std::size_t slot = part == ChartPart::Real ? 0 : 1;
  d.evaluate = [amplitude, slot](std::span<const double> x) { return 1.0 + amplitude * std::sin(x[slot]); };
  d.bound = 1.0 + std::abs(amplitude);
  d.descriptor = "sine:" + std::to_string(mode.kx) + "," + std::to_string(mode.ky) + ":" +
                 (part == ChartPart::Real ? "re" : "im") + ":" + std::to_string(amplitude);
  return d;
}

/// rho = height * exp(-|x|^2 / (2 width^2)) over the two chart coordinates of one
/// mode; its mu-mass height * width^2 / (1 + width^2) is stored in `mass`.
inline CylinderDensity gaussian_bump_density(ModeIndex mode, double height, double width) {
  if (!mode.in_upper_half()) throw std::invalid_argument("density support must be half-lattice modes");
  if (!(height > 0.0) || !(width > 0.0)) throw std::invalid_argument("bump height and width must be positive");
  CylinderDensity d;
  d.support = {mode};
  d.evaluate = [height, width](std::span<const double> x) {
    return height * std::exp(-(x[0] * x[0] + x[1] * x[1]) / (2.0 * width * width));
  };
  d.bound = height;
  d.mass = height * width * width / (1.0 + width * width);
  d.descriptor = "bump:" + std::to_string(mode.kx) + "," + std::to_string(mode.ky) + ":" +
                 std::to_string(height) + ":" + std::to_string(width);
  return d;
}

struct RejectionStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const noexcept {
    return proposals == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }
};

inline constexpr std::size_t kRejectionProposalWindow = 1'000'000;
inline constexpr double kMinAcceptanceRate = 1e-4;

/// One draw from (density / ||density||_1) d mu_N by rejection against mu_N.
///
/// `stats` accumulates across calls; once it has seen a full proposal window,
/// an acceptance rate below 1e-4 aborts with std::runtime_error.
inline SpectralField sample_cylinder_density(const CylinderDensity& density, const LatticePtr& lattice,
                                             RandomSource& rng, RejectionStats& stats) {
  for (const ModeIndex k : density.support) {
    if (!lattice->contains(k)) throw std::invalid_argument("density mode " + k.to_string() + " outside lattice");
  }
  std::size_t local = 0;
  for (;;) {
    SpectralField proposal = sample_white_noise(lattice, rng);
    const double u = rng.uniform();
    ++stats.proposals;
    ++local;
    const double value = density.raw(proposal);
    if (value < 0.0 || value > density.bound * (1.0 + 1e-12)) {
      throw std::domain_error("cylinder density " + std::to_string(value) + " outside [0, bound]");
    }
    if (u * density.bound < value) {
      ++stats.accepted;
      return proposal;
    }
    if ((stats.proposals >= kRejectionProposalWindow && stats.acceptance_rate() < kMinAcceptanceRate) ||
        local >= kRejectionProposalWindow) {
      throw std::runtime_error("rejection sampler acceptance rate " +
                               std::to_string(stats.acceptance_rate()) + " below 1e-4 after " +
                               std::to_string(stats.proposals) + " proposals; density bound too loose");
    }
  }
}

inline SpectralField sample_cylinder_density(const CylinderDensity& density, const LatticePtr& lattice,
                                             RandomSource& rng) {
  RejectionStats stats;
  return sample_cylinder_density(density, lattice, rng, stats);
}

}  // namespace stocheuler
