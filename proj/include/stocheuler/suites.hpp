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

// Diagnostic suites. Each returns report rows (one assertion per row) that
// the CLI writes as CSV and the acceptance runner summarizes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "stocheuler/cylinder.hpp"
#include "stocheuler/dynamics.hpp"
#include "stocheuler/ensemble.hpp"
#include "stocheuler/measures.hpp"
#include "stocheuler/nonlinearity.hpp"
#include "stocheuler/observables.hpp"
#include "stocheuler/parallel.hpp"
#include "stocheuler/random.hpp"
#include "stocheuler/spectral.hpp"
#include "stocheuler/stats.hpp"

namespace stocheuler {

/// Compact label for a real parameter, e.g. 1, -0.5, 1.41421.
inline std::string format_cutoff(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct SuiteResult {
  std::string name;
  std::vector<ReportRow> rows;
  std::vector<std::string> notes;

  bool passed() const { return !rows.empty() && all_pass(rows); }
  void check(double t, ModeIndex mode, std::string estimator, double value, double threshold, bool pass) {
    rows.push_back({t, mode, std::move(estimator), value, threshold, pass});
  }
  void at_most(std::string estimator, double value, double threshold, double t = 0.0, ModeIndex mode = {}) {
    check(t, mode, std::move(estimator), value, threshold, value <= threshold);
  }
};

// ---------------------------------------------------------------------------

struct DriftSuiteParams {
  std::vector<int> cutoffs{2, 3, 4, 8};
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
};

inline SuiteResult drift_suite(const DriftSuiteParams& p) {
  SuiteResult r{"drift", {}, {}};
  for (const int n : p.cutoffs) {
    RandomSource rng(p.seed, static_cast<std::uint64_t>(n));
    const auto rep = divergence_check(build_lattice(n), rng, p.trials);
    const ModeIndex tag{n, 0};
    r.at_most("pairing_scaled_N" + std::to_string(n), rep.max_pairing_scaled, 1e-10, 0.0, tag);
    r.at_most("divergence_scaled_N" + std::to_string(n), rep.max_divergence_scaled, 1e-10, 0.0, tag);
  }
  // xi_(1,0) = xi_(1,1) = 1 on N = 2: only k = (1,0), (1,1) feed n = (2,1),
  // with k^perp . n / |k|^2 = -1 and +1/2, so b_(2,1) = -(-1 + 1/2) = 1/2.
  const LatticePtr lat = build_lattice(2);
  SpectralField xi(lat);
  xi.set(ModeIndex{1, 0}, 1.0);
  xi.set(ModeIndex{1, 1}, 1.0);
  const Complex b = eval_drift(xi).value.at({2, 1});
  r.at_most("hand_example_b_2_1_error", std::abs(b - Complex(0.5, 0.0)), 1e-12, 0.0, {2, 1});
  return r;
}

// ---------------------------------------------------------------------------

struct ConservationSuiteParams {
  int N = 4;
  double t_final = 10.0;
  double dt = 1e-3;
  std::uint64_t seed = 2;
  double tolerance = 1e-8;
};

inline SuiteResult conservation_suite(const ConservationSuiteParams& p) {
  SuiteResult r{"conservation", {}, {}};
  const LatticePtr lat = build_lattice(p.N);
  RandomSource rng(p.seed, 0);
  SpectralField w = sample_white_noise(lat, rng);
  const double s0 = enstrophy(w), e0 = energy(w);
  Integrator integ(lat, {p.dt, Scheme::ExplicitRk4, 0.0, p.t_final});
  const auto steps = static_cast<std::size_t>(std::llround(p.t_final / p.dt));
  std::vector<Complex> state(w.half().begin(), w.half().end());
  double worst_s = 0.0, worst_e = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    integ.step(state, nullptr);
    const SpectralField f = SpectralField::from_half(lat, state);
    worst_s = std::max(worst_s, std::abs(enstrophy(f) - s0) / s0);
    worst_e = std::max(worst_e, std::abs(energy(f) - e0) / e0);
  }
  r.at_most("enstrophy_relative_drift", worst_s, p.tolerance, p.t_final);
  r.at_most("energy_relative_drift", worst_e, p.tolerance, p.t_final);
  return r;
}

// ---------------------------------------------------------------------------

struct SecondMomentSuiteParams {
  int N = 1;
  double alpha = 0.5;
  std::vector<double> times{0.5, 1.0, 2.0};
  std::size_t ensemble = 10'000;
  double dt = 1e-3;
  std::uint64_t seed = 3;
  unsigned workers = 1;
};

/// E|omega_t|^2 = |omega_0|^2 e^{-2 alpha t} + |Lambda_N| (1 - e^{-2 alpha t}) from omega_0 = 0.
inline SuiteResult second_moment_suite(const SecondMomentSuiteParams& p) {
  SuiteResult r{"second-moment", {}, {}};
  const LatticePtr lat = build_lattice(p.N);
  const double t_max = *std::max_element(p.times.begin(), p.times.end());
  const auto steps = static_cast<std::size_t>(std::llround(t_max / p.dt));
  std::vector<std::size_t> marks;
  for (double t : p.times) marks.push_back(static_cast<std::size_t>(std::llround(t / p.dt)));
  std::vector<double> values(p.ensemble * marks.size());
  parallel_for(p.ensemble, p.workers, [&](std::size_t i) {
    RandomSource rng(p.seed, i);
    Integrator integ(lat, {p.dt, Scheme::OuSplit, p.alpha, t_max});
    std::vector<Complex> state(lat->half_size());
    for (std::size_t k = 1; k <= steps; ++k) {
      integ.step(state, &rng);
      for (std::size_t m = 0; m < marks.size(); ++m) {
        if (marks[m] == k) values[m * p.ensemble + i] = hnorm_sq(SpectralField::from_half(lat, state));
      }
    }
  });
  for (std::size_t m = 0; m < marks.size(); ++m) {
    const auto moments = sample_moments(std::span<const double>(values).subspan(m * p.ensemble, p.ensemble));
    const double t = p.times[m];
    const double expected = static_cast<double>(lat->size()) * -std::expm1(-2.0 * p.alpha * t);
    const double z = moments.z_score(expected);
    r.check(t, {}, "second_moment_z", z, 4.0, std::abs(z) < 4.0);
  }
  return r;
}

// ---------------------------------------------------------------------------

struct StationaritySuiteParams {
  int N = 4;
  double alpha = 1.0;
  double beta = 0.0;
  double t_final = 5.0;
  double dt = 0.01;
  double save_every = 0.5;
  std::size_t ensemble = 10'000;
  std::uint64_t seed = 4;
  unsigned workers = 1;
};

inline EnsembleConfig stationarity_config(const StationaritySuiteParams& p) {
  EnsembleConfig c;
  c.N = p.N;
  c.alpha = p.alpha;
  c.beta_init = p.beta;
  c.init = InitKind::Gibbs;
  c.dt = p.dt;
  c.t_final = p.t_final;
  c.save_every = p.save_every;
  c.ensemble_size = p.ensemble;
  c.scheme = p.alpha == 0.0 ? Scheme::ExplicitRk4 : Scheme::OuSplit;
  c.seed = p.seed;
  c.workers = p.workers;
  return c;
}

inline SuiteResult stationarity_suite(const StationaritySuiteParams& p) {
  SuiteResult r{"stationarity", {}, {}};
  const EnsembleRun run = run_ensemble(stationarity_config(p));
  if (run.overflow_count() > 0) {
    r.at_most("overflowed_trajectories", static_cast<double>(run.overflow_count()), 0.0);
  }
  const auto rows = stationarity_test(mode_variances(run), {p.beta, p.N});
  r.rows.insert(r.rows.end(), rows.begin(), rows.end());
  return r;
}

// ---------------------------------------------------------------------------

struct EntropyDecaySuiteParams {
  int N = 2;
  double alpha = 1.0;
  ModeIndex mode{1, 0};
  double amplitude = 0.9;
  std::vector<double> times{0.5, 1.0, 2.0};
  std::size_t ensemble = 100'000;
  double dt = 0.01;
  std::uint64_t seed = 5;
  unsigned workers = 1;
  std::size_t calibration_replicas = 20;
};

/// Relative entropy and chi^2 of rho(x) = 1 + a sin(x) against N(0, 1).
struct SineTiltDivergences {
  double entropy = 0.0;
  double chi2 = 0.0;
};

inline SineTiltDivergences sine_tilt_divergences(double a) {
  // Trapezoid on [-12, 12]; the integrands are smooth and Gaussian-damped.
  const int n = 24'000;
  const double h = 24.0 / n;
  CompensatedSum ent, chi;
  for (int i = 0; i <= n; ++i) {
    const double x = -12.0 + i * h;
    const double w = (i == 0 || i == n ? 0.5 : 1.0) * h * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    const double rho = 1.0 + a * std::sin(x);
    if (rho > 0.0) ent.add(w * rho * std::log(rho));
    chi.add(w * (rho - 1.0) * (rho - 1.0));
  }
  return {ent.value(), chi.value()};
}

inline SuiteResult entropy_decay_suite(const EntropyDecaySuiteParams& p) {
  SuiteResult r{"entropy-decay", {}, {}};
  const auto init = sine_tilt_divergences(p.amplitude);
  r.notes.push_back("H(rho0)=" + std::to_string(init.entropy) + " chi2(rho0)=" + std::to_string(init.chi2));

  EnsembleConfig c;
  c.N = p.N;
  c.alpha = p.alpha;
  c.init = InitKind::Density;
  c.density = sine_tilt_density(p.mode, p.amplitude);
  c.dt = p.dt;
  c.t_final = *std::max_element(p.times.begin(), p.times.end());
  c.save_every = p.times.front();
  for (double t : p.times) {
    const double q = t / c.save_every;
    if (std::abs(q - std::round(q)) > 1e-9) c.save_every = c.dt;
  }
  c.ensemble_size = p.ensemble;
  c.scheme = Scheme::OuSplit;
  c.seed = p.seed;
  c.workers = p.workers;
  const EnsembleRun run = run_ensemble(c);

  const MeasureSpec reference{0.0, p.N};
  RandomSource cal_rng(p.seed ^ 0x5bd1e995ULL, 0);
  const std::vector<ModeIndex> modes{p.mode, {1, 1}};
  for (const ModeIndex k : modes) {
    const std::size_t slot = run.lattice->half_slot(run.lattice->index_of(k));
    const EstimatorBias bias = calibrate_bias(k, reference, run.trajectories() - run.overflow_count(), cal_rng,
                                              p.calibration_replicas);
    for (double t : p.times) {
      std::size_t s = 0;
      while (s + 1 < run.times.size() && std::abs(run.times[s] - t) > 1e-9) ++s;
      auto hist = MarginalHistogram::for_reference(k, reference);
      for (std::size_t i = 0; i < run.trajectories(); ++i) {
        if (!run.overflowed[i]) hist.add(run.state(s, i)[slot]);
      }
      const auto d = marginal_divergences(hist, reference);
      const double decay = std::exp(-2.0 * p.alpha * t);
      r.at_most("kl", d.kl, decay * init.entropy + bias.kl, t, k);
      r.at_most("chi2", d.chi2, decay * init.chi2 + bias.chi2, t, k);
      r.at_most("tv_l1", d.l1, std::exp(-p.alpha * t) * std::sqrt(2.0 * init.entropy) + bias.l1, t, k);
      const auto kc = kullback_check(hist, reference, init.entropy, bias.l1);
      r.check(t, k, "tv_pinsker_consistency", d.l1, std::sqrt(2.0 * d.kl) + bias.l1, kc.pinsker_consistent);
      r.check(t, k, "tv_chi2_consistency", d.l1, std::sqrt(d.chi2) + bias.l1, kc.chi2_consistent);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

struct GibbsSuiteParams {
  std::vector<double> betas{-0.5, 1.0};
  std::vector<double> cutoffs{1.0, 5.0};
  std::size_t samples = 100'000;
  std::uint64_t seed = 6;
};

inline SuiteResult gibbs_suite(const GibbsSuiteParams& p) {
  SuiteResult r{"gibbs", {}, {}};
  std::uint64_t stream = 0;
  for (const double kcut : p.cutoffs) {
    const LatticePtr lat = build_lattice(std::max(1, static_cast<int>(std::floor(kcut))));
    const auto ball = half_ball(kcut);
    // Wick variance under white noise.
    {
      RandomSource rng(p.seed, stream++);
      std::vector<double> e(p.samples);
      for (auto& v : e) v = 2.0 * renormalized_energy(sample_white_noise(lat, rng), kcut);
      const auto m = sample_moments(e);
      CompensatedSum m4;
      for (double v : e) m4.add(std::pow(v - m.mean, 4));
      const double n = static_cast<double>(e.size());
      const double var_se = std::sqrt(std::max(0.0, m4.value() / n - m.variance * m.variance) / n);
      const double z = (m.variance - wick_variance(kcut)) / var_se;
      r.check(0.0, {}, "wick_variance_z_K" + format_cutoff(kcut), z, 4.0, std::abs(z) < 4.0);
    }
    for (const double beta : p.betas) {
      RandomSource rng(p.seed, stream++);
      const double z_exact = truncated_partition_function(beta, kcut);
      std::vector<double> raw(p.samples);
      std::vector<std::vector<double>> tilted(ball.size(), std::vector<double>(p.samples));
      for (std::size_t i = 0; i < p.samples; ++i) {
        const SpectralField w = sample_white_noise(lat, rng);
        raw[i] = std::exp(-beta * renormalized_energy(w, kcut));
        const double weight = raw[i] / z_exact;
        for (std::size_t b = 0; b < ball.size(); ++b) tilted[b][i] = weight * std::norm(w.at(ball[b]));
      }
      const auto zm = sample_moments(raw);
      const std::string tag = "_beta" + format_cutoff(beta) + "_K" + format_cutoff(kcut);
      const double zz = zm.z_score(z_exact);
      r.check(0.0, {}, "partition_z" + tag, zz, 3.0, std::abs(zz) < 3.0);
      const MeasureSpec spec{beta, lat->cutoff()};
      for (std::size_t b = 0; b < ball.size(); ++b) {
        const double zt = sample_moments(tilted[b]).z_score(spec.mode_variance(ball[b]));
        r.check(0.0, ball[b], "reweighted_variance_z" + tag, zt, 4.0, std::abs(zt) < 4.0);
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

struct NonlinearitySuiteParams {
  ModeIndex phi_mode{2, 1};
  int N = 2;
  int order = 8;
  std::size_t grid = 64;
  int chaos_order = 8;
  std::size_t chaos_samples = 100'000;
  std::size_t symmetry_pairs = 1000;
  std::uint64_t seed = 7;
  unsigned workers = 1;
};

inline SuiteResult nonlinearity_suite(const NonlinearitySuiteParams& p) {
  SuiteResult r{"chaos", {}, {}};
  const TestFunction phi = TestFunction::cosine(p.phi_mode);
  const KernelSpec spec{phi, p.order, p.grid};
  const LatticePtr lat = build_lattice(p.N);
  RandomSource rng(p.seed, 0);

  // Oracle equivalence on random fields and the hand-checked drift field.
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const SpectralField w = sample_white_noise(lat, rng);
    worst = std::max(worst, std::abs(pairing_spectral(w, phi) - pairing_quadrature(w, spec)));
  }
  SpectralField xi(lat);
  xi.set(ModeIndex{1, 0}, 1.0);
  xi.set(ModeIndex{1, 1}, 1.0);
  worst = std::max(worst, std::abs(pairing_spectral(xi, phi) - pairing_quadrature(xi, spec)));
  r.at_most("spectral_vs_quadrature", worst, 1e-6);

  // Exact symmetry and zero diagonal.
  double asym = 0.0, diag = 0.0;
  for (std::size_t i = 0; i < p.symmetry_pairs; ++i) {
    const Point x{2.0 * std::numbers::pi * rng.uniform(), 2.0 * std::numbers::pi * rng.uniform()};
    const Point y{2.0 * std::numbers::pi * rng.uniform(), 2.0 * std::numbers::pi * rng.uniform()};
    asym = std::max(asym, std::abs(eval_kernel(spec, x, y) - eval_kernel(spec, y, x)));
    diag = std::max(diag, std::abs(eval_kernel(spec, x, x)));
  }
  r.at_most("kernel_asymmetry", asym, 0.0);
  r.at_most("kernel_diagonal", diag, 0.0);

  // Second-chaos isometry.
  const KernelSpec chaos_spec{phi, p.chaos_order, p.grid};
  const auto chaos = chaos_statistics(chaos_spec, rng, p.chaos_samples, p.workers);
  r.check(0.0, {}, "chaos_mean_z", chaos.pairing.z_score(0.0), 4.0, std::abs(chaos.pairing.z_score(0.0)) < 4.0);
  r.check(0.0, {}, "chaos_variance_ratio", chaos.variance_ratio, 0.05, std::abs(chaos.variance_ratio - 1.0) <= 0.05);
  const double spread = std::abs(chaos.exp_moments.back() / chaos.exp_moments.front() - 1.0);
  r.check(0.0, {}, "exp_integrability_prefix_spread", spread, 0.1,
          std::isfinite(chaos.exp_moments.back()) && spread <= 0.1);
  r.notes.push_back("fitted q=2 constant E X^2 / c2^2 = " + std::to_string(chaos.fitted_c2));

  // Cauchy property of the truncations: ||H^n - H^{2n}|| decreasing in n.
  std::vector<double> logn, logd;
  double prev = INFINITY;
  bool decreasing = true;
  for (const int n : {2, 4, 8, 16}) {
    const double d = kernel_l2_distance({phi, n, 0}, {phi, 2 * n, 0});
    decreasing = decreasing && d < prev;
    prev = d;
    logn.push_back(std::log(n));
    logd.push_back(std::log(d));
  }
  const double gamma = -fit_line(logn, logd).slope;
  r.check(0.0, {}, "truncation_cauchy_decreasing", prev, 0.0, decreasing);
  r.notes.push_back("fitted decay exponent gamma = " + std::to_string(gamma));

  // Boundedness: max |H^n_phi| / c2 over a small cosine family.
  std::vector<double> ratios;
  for (const ModeIndex m : {ModeIndex{1, 0}, ModeIndex{2, 1}, ModeIndex{3, 1}, ModeIndex{1, 3}}) {
    ratios.push_back(kernel_sup_ratio({TestFunction::cosine(m), p.order, p.grid}, rng, 20'000));
  }
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  r.check(0.0, {}, "boundedness_constant_spread", hi / lo, 4.0, hi / lo <= 4.0);
  return r;
}

// ---------------------------------------------------------------------------

struct InvarianceSuiteParams {
  int N = 4;
  std::vector<double> betas{-0.5, 0.0, 1.0, 3.0};
  std::size_t samples = 100'000;
  std::uint64_t seed = 8;
};

inline std::vector<std::pair<std::string, CylinderFunction>> invariance_test_functions(const ModeLattice& lat) {
  const std::size_t a = chart_index(lat, {1, 0}, ChartPart::Real);
  const std::size_t b = chart_index(lat, {1, 1}, ChartPart::Imag);
  const std::size_t c = chart_index(lat, {0, 1}, ChartPart::Real);
  return {{"linear", CylinderFunction::coordinate(a)},
          {"quadratic", CylinderFunction::monomial({{a, 1}, {b, 1}}) + CylinderFunction::monomial({{c, 2}}, 0.5)}};
}

inline SuiteResult invariance_suite(const InvarianceSuiteParams& p) {
  SuiteResult r{"invariance", {}, {}};
  const LatticePtr lat = build_lattice(p.N);
  std::uint64_t stream = 0;
  for (const auto& [name, phi] : invariance_test_functions(*lat)) {
    for (const double beta : p.betas) {
      RandomSource rng(p.seed, stream++);
      const auto rep = infinitesimal_invariance_check(phi, beta, lat, rng, p.samples);
      const std::string tag = "_" + name + "_beta" + format_cutoff(beta);
      r.check(0.0, {}, "energy_moment_z" + tag, rep.energy_z(), 4.0, std::abs(rep.energy_z()) < 4.0);
      r.check(0.0, {}, "gibbs_moment_z" + tag, rep.gibbs_z(), 4.0, std::abs(rep.gibbs_z()) < 4.0);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

struct IncrementsSuiteParams {
  int N = 4;
  double alpha = 1.0;
  std::vector<ModeIndex> modes{{1, 0}, {2, 1}};
  std::vector<int> gap_steps{1, 2, 5, 10, 20, 50, 100};
  double dt = 1e-3;
  std::size_t ensemble = 10'000;
  std::uint64_t seed = 9;
  unsigned workers = 1;
};

/// E|<omega_{s+h} - omega_s, e_k>|^4 against h from a stationary start; the
/// noise makes it ~ h^2 for small h.
inline SuiteResult increments_suite(const IncrementsSuiteParams& p) {
  SuiteResult r{"increments", {}, {}};
  const LatticePtr lat = build_lattice(p.N);
  const int max_steps = *std::max_element(p.gap_steps.begin(), p.gap_steps.end());
  std::vector<std::size_t> slots;
  for (const ModeIndex k : p.modes) slots.push_back(lat->half_slot(lat->index_of(k)));
  const std::size_t cols = p.modes.size() * p.gap_steps.size();
  std::vector<double> fourth(p.ensemble * cols);
  parallel_for(p.ensemble, p.workers, [&](std::size_t i) {
    RandomSource rng(p.seed, i);
    const SpectralField w0 = sample_white_noise(lat, rng);
    std::vector<Complex> state(w0.half().begin(), w0.half().end());
    Integrator integ(lat, {p.dt, Scheme::OuSplit, p.alpha, p.dt * max_steps});
    for (int k = 1; k <= max_steps; ++k) {
      integ.step(state, &rng);
      for (std::size_t g = 0; g < p.gap_steps.size(); ++g) {
        if (p.gap_steps[g] != k) continue;
        for (std::size_t m = 0; m < slots.size(); ++m) {
          const double d2 = std::norm(state[slots[m]] - w0.half()[slots[m]]);
          fourth[i * cols + m * p.gap_steps.size() + g] = d2 * d2;
        }
      }
    }
  });
  for (std::size_t m = 0; m < p.modes.size(); ++m) {
    std::vector<double> lx, ly;
    for (std::size_t g = 0; g < p.gap_steps.size(); ++g) {
      CompensatedSum s;
      for (std::size_t i = 0; i < p.ensemble; ++i) s.add(fourth[i * cols + m * p.gap_steps.size() + g]);
      lx.push_back(std::log(p.gap_steps[g] * p.dt));
      ly.push_back(std::log(s.value() / static_cast<double>(p.ensemble)));
    }
    const double slope = fit_line(lx, ly).slope;
    r.check(0.0, p.modes[m], "fourth_moment_loglog_slope", slope, 1.8, slope >= 1.8);
  }
  return r;
}

// ---------------------------------------------------------------------------

struct FokkerPlanckSuiteParams {
  int N = 2;
  double alpha = 1.0;
  double beta = 0.0;
  double t_final = 0.5;
  double dt = 0.005;
  std::size_t ensemble = 4000;
  std::uint64_t seed = 10;
  unsigned workers = 1;
};

/// Weak Fokker-Planck residual: for cylinder psi, the martingale
/// psi(omega_T) - psi(omega_0) - int_0^T A psi(omega_s) ds has mean zero.
inline SuiteResult fokker_planck_suite(const FokkerPlanckSuiteParams& p) {
  SuiteResult r{"fokker-planck", {}, {}};
  const LatticePtr lat = build_lattice(p.N);
  const std::size_t a = chart_index(*lat, {1, 0}, ChartPart::Real);
  const std::size_t b = chart_index(*lat, {1, 1}, ChartPart::Real);
  const std::size_t c = chart_index(*lat, {0, 1}, ChartPart::Imag);
  const std::vector<std::pair<std::string, CylinderFunction>> tests{
      {"quadratic", CylinderFunction::monomial({{a, 1}, {b, 1}})},
      {"quartic", CylinderFunction::monomial({{a, 2}, {c, 2}}, 0.25) + CylinderFunction::monomial({{b, 3}})},
  };
  const auto steps = static_cast<std::size_t>(std::llround(p.t_final / p.dt));
  std::vector<double> residual(p.ensemble * tests.size());
  parallel_for(p.ensemble, p.workers, [&](std::size_t i) {
    RandomSource rng(p.seed, i);
    // A tilted start makes the test non-trivial: the law moves in time.
    SpectralField w = sample_energy_enstrophy({p.beta, p.N}, lat, rng);
    w.set(ModeIndex{1, 0}, w.at({1, 0}) + Complex(1.0, 0.0));
    Integrator integ(lat, {p.dt, Scheme::OuSplit, p.alpha, p.t_final});
    std::vector<Complex> state(w.half().begin(), w.half().end());
    std::vector<double> start(tests.size()), integral(tests.size()), prev_gen(tests.size());
    const auto x0 = to_chart(w);
    for (std::size_t q = 0; q < tests.size(); ++q) {
      start[q] = tests[q].second(x0);
      prev_gen[q] = eval_generator(tests[q].second, w, p.alpha);
    }
    for (std::size_t k = 0; k < steps; ++k) {
      integ.step(state, &rng);
      const SpectralField f = SpectralField::from_half(lat, state);
      for (std::size_t q = 0; q < tests.size(); ++q) {
        const double g = eval_generator(tests[q].second, f, p.alpha);
        integral[q] += 0.5 * p.dt * (prev_gen[q] + g);
        prev_gen[q] = g;
      }
    }
    const auto xt = to_chart(SpectralField::from_half(lat, state));
    for (std::size_t q = 0; q < tests.size(); ++q) {
      residual[i * tests.size() + q] = tests[q].second(xt) - start[q] - integral[q];
    }
  });
  for (std::size_t q = 0; q < tests.size(); ++q) {
    std::vector<double> v(p.ensemble);
    for (std::size_t i = 0; i < p.ensemble; ++i) v[i] = residual[i * tests.size() + q];
    const double z = sample_moments(v).z_score(0.0);
    r.check(p.t_final, {}, "weak_residual_z_" + tests[q].first, z, 4.0, std::abs(z) < 4.0);
  }
  return r;
}

}  // namespace stocheuler
