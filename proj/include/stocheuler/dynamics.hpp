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

// Galerkin-truncated stochastic Euler dynamics on H_N:
//
//   d omega + b_N(omega) dt = -alpha omega dt + sqrt(2 alpha) dW^N,
//   b_N(xi)_n = -sum_k (k^perp . n / |k|^2) xi_k xi_{n-k},
//
// with k, n - k, n all in Lambda_N. b_N(xi)_n is the n-th Fourier
// coefficient of u . grad omega for u the Biot-Savart velocity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stocheuler/cylinder.hpp"
#include "stocheuler/random.hpp"
#include "stocheuler/spectral.hpp"

namespace stocheuler {

struct DriftResult {
  SpectralField value;
  double pairing_with_input = 0.0;  // <b_N(xi), xi>_{H_N}
};

/// Reference drift: direct double sum over k for each half-lattice n.
inline DriftResult eval_drift(const SpectralField& field) {
  const auto& lat = field.lattice();
  const auto coeffs = field.full();
  std::vector<Complex> half(lat.half_size());
  for (std::size_t j = 0; j < lat.half_size(); ++j) {
    const ModeIndex n = lat.half_mode(j);
    Complex acc{};
    for (std::size_t a = 0; a < lat.size(); ++a) {
      const ModeIndex k = lat.mode(a);
      const auto b = lat.find(n - k);
      if (!b) continue;
      acc += (static_cast<double>(k.perp().dot(n)) / k.norm_sq()) * coeffs[a] * coeffs[*b];
    }
    half[j] = -acc;
  }
  DriftResult r{SpectralField::from_half(field.lattice_ptr(), std::move(half)), 0.0};
  r.pairing_with_input = inner(r.value, field);
  return r;
}

/// Precomputed triad table for repeated drift evaluation.
///
/// Each unordered pair {a, b} with a + b = n contributes
/// c_ab xi_a xi_b, c_ab = -(a^perp . b)(1/|a|^2 - 1/|b|^2); pairs with
/// |a| = |b| drop out.
class GalerkinDrift {
 public:
  struct Triad {
    std::uint32_t a;
    std::uint32_t b;
    double coeff;
  };

  explicit GalerkinDrift(LatticePtr lattice) : lattice_(std::move(lattice)) {
    const auto& lat = *lattice_;
    offsets_.reserve(lat.half_size() + 1);
    offsets_.push_back(0);
    for (std::size_t j = 0; j < lat.half_size(); ++j) {
      const ModeIndex n = lat.half_mode(j);
      for (std::size_t a = 0; a < lat.size(); ++a) {
        const ModeIndex ka = lat.mode(a);
        const auto b = lat.find(n - ka);
        if (!b || *b <= a) continue;
        const ModeIndex kb = lat.mode(*b);
        const double c = -static_cast<double>(ka.perp().dot(kb)) *
                         (1.0 / ka.norm_sq() - 1.0 / kb.norm_sq());
        if (c == 0.0) continue;
        triads_.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(*b), c});
      }
      offsets_.push_back(triads_.size());
    }
  }

  const ModeLattice& lattice() const noexcept { return *lattice_; }
  std::size_t triad_count() const noexcept { return triads_.size(); }

  /// full: coefficients on all of Lambda_N; out: drift on the half lattice.
  void apply(std::span<const Complex> full, std::span<Complex> out) const noexcept {
    for (std::size_t j = 0; j + 1 < offsets_.size(); ++j) {
      double re = 0.0, im = 0.0;
      for (std::size_t t = offsets_[j]; t < offsets_[j + 1]; ++t) {
        const Triad& tr = triads_[t];
        const Complex x = full[tr.a];
        const Complex y = full[tr.b];
        re += tr.coeff * (x.real() * y.real() - x.imag() * y.imag());
        im += tr.coeff * (x.real() * y.imag() + x.imag() * y.real());
      }
      out[j] = {re, im};
    }
  }

  SpectralField operator()(const SpectralField& field) const {
    const auto full = field.full();
    std::vector<Complex> half(lattice_->half_size());
    apply(full, half);
    return SpectralField::from_half(field.lattice_ptr(), std::move(half));
  }

 private:
  LatticePtr lattice_;
  std::vector<Triad> triads_;
  std::vector<std::size_t> offsets_;
};

/// Writes the full coefficient vector for a half-lattice state.
inline void expand_half(const ModeLattice& lat, std::span<const Complex> half, std::span<Complex> full) noexcept {
  const std::size_t h = lat.half_size();
  for (std::size_t j = 0; j < h; ++j) {
    full[h + j] = half[j];
    full[h - 1 - j] = std::conj(half[j]);
  }
}

// ---------------------------------------------------------------------------
// Radial cutoff chi_n(xi) = chi(|xi| / n): 1 on the unit ball, 0 outside the
// radius-2 ball, quintic smoothstep in between (C^2, monotone).

struct CutoffSpec {
  double n = 1.0;

  static double profile(double r) noexcept {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    const double u = r - 1.0;
    return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
  }
  static double profile_derivative(double r) noexcept {
    if (r <= 1.0 || r >= 2.0) return 0.0;
    const double u = r - 1.0;
    return -30.0 * u * u * (1.0 - u) * (1.0 - u);
  }

  double operator()(const SpectralField& xi) const { return profile(std::sqrt(hnorm_sq(xi)) / n); }
};

inline DriftResult eval_cutoff_drift(const SpectralField& field, const CutoffSpec& cutoff) {
  if (!(cutoff.n > 0.0)) throw std::invalid_argument("cutoff radius must be positive");
  DriftResult r = eval_drift(field);
  const double chi = cutoff(field);
  r.value *= chi;
  r.pairing_with_input *= chi;
  return r;
}

/// Euclidean divergence of b_N in the real chart at xi.
///
/// b_m is quadratic, so d(Re b_m)/d(Re xi_m) and d(Im b_m)/d(Im xi_m) are
/// linear in xi; they are formed term by term from the double sum, using
/// xi_{-m} = conj(xi_m).
inline double drift_divergence(const SpectralField& field) {
  const auto& lat = field.lattice();
  const auto coeffs = field.full();
  double div = 0.0;
  for (std::size_t j = 0; j < lat.half_size(); ++j) {
    const ModeIndex m = lat.half_mode(j);
    Complex d_re{}, d_im{};
    for (std::size_t a = 0; a < lat.size(); ++a) {
      const ModeIndex k = lat.mode(a);
      const auto b = lat.find(m - k);
      if (!b) continue;
      const double c = -static_cast<double>(k.perp().dot(m)) / k.norm_sq();
      const ModeIndex l = m - k;
      // d/d(Re xi_m) of xi_k: 1 if k = m or k = -m; d/d(Im xi_m): +i or -i.
      auto partial = [&](ModeIndex q, Complex other) {
        if (q == m) {
          d_re += c * other;
          d_im += c * Complex(0.0, 1.0) * other;
        } else if (q == -m) {
          d_re += c * other;
          d_im += c * Complex(0.0, -1.0) * other;
        }
      };
      partial(k, coeffs[*b]);
      partial(l, coeffs[a]);
    }
    div += d_re.real() + d_im.imag();
  }
  return div;
}

/// div(chi_n b_N) = chi_n div b_N + chi'(|xi|/n) <xi, b_N> / (n |xi|).
inline double cutoff_drift_divergence(const SpectralField& field, const CutoffSpec& cutoff) {
  const double norm = std::sqrt(hnorm_sq(field));
  const double r = norm / cutoff.n;
  const double base = drift_divergence(field);
  const DriftResult b = eval_drift(field);
  const double radial = norm > 0.0 ? CutoffSpec::profile_derivative(r) * b.pairing_with_input / (cutoff.n * norm) : 0.0;
  return CutoffSpec::profile(r) * base + radial;
}

struct DivergenceReport {
  std::size_t trials = 0;
  double max_divergence = 0.0;
  double max_pairing = 0.0;
  /// max |div| / (1 + |xi|) and max |<b, xi>| / (1 + |xi|^3).
  double max_divergence_scaled = 0.0;
  double max_pairing_scaled = 0.0;
};

/// Random white-noise fields (scaled by a random amplitude in [0, 3]) probed
/// for divergence and orthogonality.
inline DivergenceReport divergence_check(const LatticePtr& lattice, RandomSource& rng, std::size_t trials) {
  if (trials < 1) throw std::invalid_argument("divergence_check needs at least one trial");
  DivergenceReport rep;
  rep.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<Complex> half(lattice->half_size());
    const double amplitude = 3.0 * rng.uniform();
    for (auto& z : half) z = amplitude * rng.complex_normal();
    const SpectralField xi = SpectralField::from_half(lattice, std::move(half));
    const double norm = std::sqrt(hnorm_sq(xi));
    const double div = std::abs(drift_divergence(xi));
    const double pair = std::abs(eval_drift(xi).pairing_with_input);
    rep.max_divergence = std::max(rep.max_divergence, div);
    rep.max_pairing = std::max(rep.max_pairing, pair);
    rep.max_divergence_scaled = std::max(rep.max_divergence_scaled, div / (1.0 + norm));
    rep.max_pairing_scaled = std::max(rep.max_pairing_scaled, pair / (1.0 + norm * norm * norm));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Time integration.

enum class Scheme { ExplicitRk4, EulerMaruyama, OuSplit };

inline std::string_view scheme_name(Scheme s) noexcept {
  switch (s) {
    case Scheme::ExplicitRk4: return "explicit-rk4";
    case Scheme::EulerMaruyama: return "em";
    case Scheme::OuSplit: return "ou-split";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view name) {
  if (name == "explicit-rk4" || name == "rk4") return Scheme::ExplicitRk4;
  if (name == "em") return Scheme::EulerMaruyama;
  if (name == "ou-split") return Scheme::OuSplit;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "' (explicit-rk4, em, ou-split)");
}

struct IntegratorConfig {
  double dt = 1e-3;
  Scheme scheme = Scheme::OuSplit;
  double alpha = 0.0;
  double t_final = 1.0;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(t_final > 0.0) || !std::isfinite(t_final)) throw std::invalid_argument("t_final must be positive");
    if (dt > t_final) throw std::invalid_argument("dt must not exceed t_final");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be >= 0");
  }
};

/// Trajectories whose H_N norm exceeds this are aborted.
inline constexpr double kOverflowNorm = 1e6;

class OverflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Advances half-lattice states in place.
///
/// explicit-rk4: classical RK4 for d xi/dt = -b_N(xi) (alpha must be 0).
/// em: xi' = xi - (b_N(xi) + alpha xi) dt + sqrt(2 alpha dt) g.
/// ou-split: RK4 substep of the nonlinear flow, then the exact OU transition
///   xi' = e^{-alpha dt} xi~ + sqrt(1 - e^{-2 alpha dt}) g.
/// g is a standard complex Gaussian per half mode (E|g_k|^2 = 1).
class Integrator {
 public:
  Integrator(LatticePtr lattice, IntegratorConfig config)
      : drift_(lattice), lattice_(std::move(lattice)), config_(config) {
    config_.validate();
    if (config_.scheme == Scheme::ExplicitRk4 && config_.alpha != 0.0) {
      throw std::invalid_argument("explicit-rk4 integrates the alpha = 0 flow; use ou-split for alpha > 0");
    }
    const std::size_t h = lattice_->half_size();
    full_.resize(lattice_->size());
    k1_.resize(h);
    k2_.resize(h);
    k3_.resize(h);
    k4_.resize(h);
    tmp_.resize(h);
    decay_ = std::exp(-config_.alpha * config_.dt);
    ou_spread_ = std::sqrt(-std::expm1(-2.0 * config_.alpha * config_.dt));
    em_spread_ = std::sqrt(2.0 * config_.alpha * config_.dt);
  }

  const IntegratorConfig& config() const noexcept { return config_; }
  const GalerkinDrift& drift() const noexcept { return drift_; }
  const LatticePtr& lattice_ptr() const noexcept { return lattice_; }

  /// One step; rng may be null only for the deterministic scheme or alpha = 0.
  void step(std::span<Complex> state, RandomSource* rng) {
    switch (config_.scheme) {
      case Scheme::ExplicitRk4:
        rk4(state);
        break;
      case Scheme::EulerMaruyama: {
        eval(state, k1_);
        const double dt = config_.dt;
        for (std::size_t j = 0; j < state.size(); ++j) {
          state[j] -= (k1_[j] + config_.alpha * state[j]) * dt;
        }
        add_noise(state, em_spread_, rng);
        break;
      }
      case Scheme::OuSplit:
        rk4(state);
        if (config_.alpha > 0.0) {
          for (auto& z : state) z *= decay_;
          add_noise(state, ou_spread_, rng);
        }
        break;
    }
    guard(state);
  }

  SpectralField step(const SpectralField& field, RandomSource* rng) {
    std::vector<Complex> s(field.half().begin(), field.half().end());
    step(s, rng);
    return SpectralField::from_half(field.lattice_ptr(), std::move(s));
  }

 private:
  void eval(std::span<const Complex> state, std::span<Complex> out) {
    expand_half(*lattice_, state, full_);
    drift_.apply(full_, out);
  }

  void rk4(std::span<Complex> y) {
    const double dt = config_.dt;
    const std::size_t h = y.size();
    eval(y, k1_);
    for (std::size_t j = 0; j < h; ++j) tmp_[j] = y[j] - 0.5 * dt * k1_[j];
    eval(tmp_, k2_);
    for (std::size_t j = 0; j < h; ++j) tmp_[j] = y[j] - 0.5 * dt * k2_[j];
    eval(tmp_, k3_);
    for (std::size_t j = 0; j < h; ++j) tmp_[j] = y[j] - dt * k3_[j];
    eval(tmp_, k4_);
    for (std::size_t j = 0; j < h; ++j) {
      y[j] -= (dt / 6.0) * (k1_[j] + 2.0 * k2_[j] + 2.0 * k3_[j] + k4_[j]);
    }
  }

  void add_noise(std::span<Complex> state, double spread, RandomSource* rng) {
    if (spread == 0.0) return;
    if (rng == nullptr) throw std::invalid_argument("stochastic step requires a random source");
    for (auto& z : state) z += spread * rng->complex_normal();
  }

  void guard(std::span<const Complex> state) const {
    double s = 0.0;
    for (const Complex& z : state) s += std::norm(z);
    const double norm = std::sqrt(2.0 * s);
    if (!(norm <= kOverflowNorm)) {
      throw OverflowError("trajectory norm " + std::to_string(norm) + " exceeded overflow guard 1e6");
    }
  }

  GalerkinDrift drift_;
  LatticePtr lattice_;
  IntegratorConfig config_;
  std::vector<Complex> full_, k1_, k2_, k3_, k4_, tmp_;
  double decay_ = 1.0;
  double ou_spread_ = 0.0;
  double em_spread_ = 0.0;
};

inline SpectralField step_deterministic(const SpectralField& field, const IntegratorConfig& config) {
  if (config.scheme != Scheme::ExplicitRk4) {
    throw std::invalid_argument("step_deterministic requires scheme explicit-rk4");
  }
  if (config.alpha != 0.0) {
    throw std::invalid_argument("step_deterministic requires alpha = 0; use ou-split for friction");
  }
  Integrator integ(field.lattice_ptr(), config);
  return integ.step(field, nullptr);
}

inline SpectralField step_stochastic(const SpectralField& field, const IntegratorConfig& config, RandomSource& rng) {
  if (config.scheme == Scheme::ExplicitRk4) {
    throw std::invalid_argument("step_stochastic requires scheme em or ou-split");
  }
  Integrator integ(field.lattice_ptr(), config);
  return integ.step(field, &rng);
}

// ---------------------------------------------------------------------------
// Semigroup and generator on cylinder functions.

inline CylinderFunction mehler_apply(const CylinderFunction& f, double t) { return f.mehler(t); }

/// A psi(xi) = -<b_N(xi), grad psi(xi)> + alpha (Lap psi(xi) - <xi, grad psi(xi)>)
/// in real-chart coordinates.
inline double eval_generator(const CylinderFunction& psi, const SpectralField& field, double alpha) {
  if (psi.is_constant()) return 0.0;
  const auto x = to_chart(field);
  const auto b = to_chart(eval_drift(field).value);
  double transport = 0.0, ou = 0.0;
  for (const auto& [j, g] : psi.gradient(x)) {
    transport += b.at(j) * g;
    ou += x[j] * g;
  }
  return -transport + alpha * (psi.laplacian()(x) - ou);
}

}  // namespace stocheuler
