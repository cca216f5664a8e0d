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

// Ensembles of independent trajectories. Trajectory i draws its initial
// condition and all of its noise from RandomSource(seed, i), and every
// reduction runs over trajectories in index order, so results do not depend
// on the number of worker threads.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stocheuler/dynamics.hpp"
#include "stocheuler/measures.hpp"
#include "stocheuler/observables.hpp"
#include "stocheuler/parallel.hpp"
#include "stocheuler/random.hpp"
#include "stocheuler/spectral.hpp"
#include "stocheuler/stats.hpp"

namespace stocheuler {

enum class InitKind { Gibbs, Zero, Density };

inline std::string_view init_name(InitKind k) noexcept {
  switch (k) {
    case InitKind::Gibbs: return "gibbs";
    case InitKind::Zero: return "zero";
    case InitKind::Density: return "density";
  }
  return "?";
}

inline InitKind parse_init(std::string_view s) {
  if (s == "gibbs") return InitKind::Gibbs;
  if (s == "zero") return InitKind::Zero;
  if (s == "density") return InitKind::Density;
  throw std::invalid_argument("unknown init '" + std::string(s) + "' (gibbs, zero, density)");
}

struct EnsembleConfig {
  int N = 4;
  double alpha = 0.0;
  double beta_init = 0.0;
  InitKind init = InitKind::Gibbs;
  std::optional<CylinderDensity> density;
  double dt = 1e-3;
  double t_final = 1.0;
  double save_every = 0.1;
  std::size_t ensemble_size = 1;
  Scheme scheme = Scheme::OuSplit;
  std::uint64_t seed = 0;
  unsigned workers = 1;

  IntegratorConfig integrator() const { return {dt, scheme, alpha, t_final}; }

  std::size_t total_steps() const { return checked_ratio(t_final, dt, "t_final / dt"); }
  std::size_t steps_per_save() const { return checked_ratio(save_every, dt, "save_every / dt"); }

  void validate() const {
    if (N < 1) throw std::invalid_argument("N must be >= 1");
    if (ensemble_size < 1) throw std::invalid_argument("ensemble_size must be >= 1");
    require_admissible_beta(beta_init);
    integrator().validate();
    if (!(save_every > 0.0) || save_every > t_final) {
      throw std::invalid_argument("save_every must be in (0, t_final]");
    }
    if (total_steps() % steps_per_save() != 0) {
      throw std::invalid_argument("t_final must be a multiple of save_every");
    }
    if (init == InitKind::Density && !density) {
      throw std::invalid_argument("init=density requires a density");
    }
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  }

 private:
  static std::size_t checked_ratio(double a, double b, const char* what) {
    const double r = a / b;
    const double n = std::round(r);
    if (n < 1.0 || std::abs(r - n) > 1e-9 * n) {
      throw std::invalid_argument(std::string(what) + " must be a positive integer");
    }
    return static_cast<std::size_t>(n);
  }
};

/// Snapshots of every trajectory at every save time. Trajectories that hit
/// the overflow guard keep NaN snapshots from the failing save time on.
struct EnsembleRun {
  EnsembleConfig config;
  LatticePtr lattice;
  std::vector<double> times;
  std::vector<Complex> data;  // [save][trajectory][half mode]
  std::vector<std::uint8_t> overflowed;
  RejectionStats rejection;

  std::size_t half_size() const noexcept { return lattice->half_size(); }
  std::size_t trajectories() const noexcept { return config.ensemble_size; }
  std::size_t overflow_count() const noexcept {
    std::size_t c = 0;
    for (auto f : overflowed) c += f;
    return c;
  }

  std::span<const Complex> state(std::size_t save, std::size_t traj) const {
    return std::span<const Complex>(data).subspan((save * trajectories() + traj) * half_size(), half_size());
  }
  SpectralField snapshot(std::size_t save, std::size_t traj) const {
    const auto s = state(save, traj);
    return SpectralField::from_half(lattice, {s.begin(), s.end()});
  }
};

inline SpectralField initial_state(const EnsembleConfig& config, const LatticePtr& lattice, RandomSource& rng,
                                   RejectionStats& stats) {
  switch (config.init) {
    case InitKind::Zero:
      return SpectralField(lattice);
    case InitKind::Density:
      return sample_cylinder_density(*config.density, lattice, rng, stats);
    case InitKind::Gibbs:
      break;
  }
  return sample_energy_enstrophy({config.beta_init, config.N}, lattice, rng);
}

inline EnsembleRun run_ensemble(const EnsembleConfig& config) {
  config.validate();
  EnsembleRun run;
  run.config = config;
  run.lattice = build_lattice(config.N);
  const std::size_t saves = config.total_steps() / config.steps_per_save() + 1;
  const std::size_t per_save = config.steps_per_save();
  for (std::size_t s = 0; s < saves; ++s) run.times.push_back(static_cast<double>(s * per_save) * config.dt);
  const std::size_t h = run.half_size();
  const std::size_t traj = config.ensemble_size;
  run.data.assign(saves * traj * h, Complex{});
  run.overflowed.assign(traj, 0);
  std::vector<RejectionStats> stats(traj);

  parallel_for(traj, config.workers, [&](std::size_t i) {
    RandomSource rng(config.seed, i);
    Integrator integ(run.lattice, config.integrator());
    const SpectralField init = initial_state(config, run.lattice, rng, stats[i]);
    std::vector<Complex> state(init.half().begin(), init.half().end());
    auto store = [&](std::size_t s) {
      std::copy(state.begin(), state.end(), run.data.begin() + static_cast<std::ptrdiff_t>((s * traj + i) * h));
    };
    store(0);
    for (std::size_t s = 1; s < saves; ++s) {
      try {
        for (std::size_t k = 0; k < per_save; ++k) integ.step(state, &rng);
      } catch (const OverflowError&) {
        run.overflowed[i] = 1;
        const Complex nan{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        for (std::size_t r = s; r < saves; ++r) {
          std::fill_n(run.data.begin() + static_cast<std::ptrdiff_t>((r * traj + i) * h), h, nan);
        }
        return;
      }
      store(s);
    }
  });
  for (const auto& st : stats) {
    run.rejection.proposals += st.proposals;
    run.rejection.accepted += st.accepted;
  }
  return run;
}

/// Statistics of |omega_k|^2 for every half mode at every save time, over
/// trajectories that never overflowed.
inline ModeVarianceTable mode_variances(const EnsembleRun& run) {
  ModeVarianceTable table;
  table.times = run.times;
  table.modes.assign(run.lattice->half().begin(), run.lattice->half().end());
  std::vector<double> buf;
  for (std::size_t s = 0; s < run.times.size(); ++s) {
    std::vector<SampleMoments> row;
    for (std::size_t j = 0; j < run.half_size(); ++j) {
      buf.clear();
      for (std::size_t i = 0; i < run.trajectories(); ++i) {
        if (run.overflowed[i]) continue;
        buf.push_back(std::norm(run.state(s, i)[j]));
      }
      row.push_back(sample_moments(buf));
    }
    table.stats.push_back(std::move(row));
  }
  return table;
}

struct SummaryRow {
  double t = 0.0;
  std::string observable;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
};

/// Ensemble means of hnorm_sq, enstrophy, energy, each |omega_k|^2 and, when
/// a Wick cutoff is given, the renormalized energy.
inline std::vector<SummaryRow> summarize(const EnsembleRun& run, std::optional<double> wick_cutoff = std::nullopt) {
  std::vector<SummaryRow> rows;
  const auto table = mode_variances(run);
  std::vector<double> a, b, c, d;
  for (std::size_t s = 0; s < run.times.size(); ++s) {
    a.clear();
    b.clear();
    c.clear();
    d.clear();
    for (std::size_t i = 0; i < run.trajectories(); ++i) {
      if (run.overflowed[i]) continue;
      const SpectralField f = run.snapshot(s, i);
      a.push_back(hnorm_sq(f));
      b.push_back(enstrophy(f));
      c.push_back(energy(f));
      if (wick_cutoff) d.push_back(renormalized_energy(f, *wick_cutoff));
    }
    const double t = run.times[s];
    std::vector<std::pair<const char*, const std::vector<double>*>> scalars{
        {"hnorm_sq", &a}, {"enstrophy", &b}, {"energy", &c}};
    if (wick_cutoff) scalars.emplace_back("renormalized_energy", &d);
    for (const auto& [name, values] : scalars) {
      const auto m = sample_moments(*values);
      rows.push_back({t, name, m.mean, m.stderr_, m.count});
    }
    for (std::size_t j = 0; j < table.modes.size(); ++j) {
      const ModeIndex k = table.modes[j];
      const auto& m = table.stats[s][j];
      rows.push_back({t, "abs2_" + std::to_string(k.kx) + "_" + std::to_string(k.ky), m.mean, m.stderr_, m.count});
    }
  }
  return rows;
}

}  // namespace stocheuler
