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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "stocheuler/cylinder.hpp"
#include "stocheuler/dynamics.hpp"
#include "stocheuler/measures.hpp"
#include "stocheuler/random.hpp"
#include "stocheuler/spectral.hpp"
#include "stocheuler/stats.hpp"

namespace stocheuler {

/// One line of a diagnostic report; mode (0, 0) means "not mode specific".
struct ReportRow {
  double t = 0.0;
  ModeIndex mode{};
  std::string estimator;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

inline bool all_pass(const std::vector<ReportRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.pass; });
}

// ---------------------------------------------------------------------------
// Quadratic observables.

/// S = 1/2 sum_k |omega_k|^2.
inline double enstrophy(const SpectralField& field) noexcept { return 0.5 * hnorm_sq(field); }

/// E = 1/2 sum_k |omega_k|^2 / |k|^2.
inline double energy(const SpectralField& field) {
  const auto& lat = field.lattice();
  double s = 0.0;
  for (std::size_t j = 0; j < lat.half_size(); ++j) {
    s += std::norm(field.half()[j]) / lat.half_mode(j).norm_sq();
  }
  return s;
}

/// 1/2 mean of omega^2 over the grid.
inline double enstrophy_quadrature(const SpectralField& field, std::size_t grid_size) {
  return 0.5 * grid_mean_square(evaluate_on_grid(field, grid_size));
}

/// 1/2 mean of |u|^2 over the grid, u the Biot-Savart velocity.
inline double energy_quadrature(const SpectralField& field, std::size_t grid_size) {
  const Velocity u = biot_savart(field);
  return 0.5 * (grid_mean_square(evaluate_on_grid(u.u1, grid_size)) +
                grid_mean_square(evaluate_on_grid(u.u2, grid_size)));
}

/// :E:_K = 1/2 sum_{0 < |k| <= K} (|omega_k|^2 - 1) / |k|^2 (Euclidean ball).
inline double renormalized_energy(const SpectralField& field, double wick_cutoff) {
  if (!(wick_cutoff >= 1.0)) throw std::invalid_argument("Wick cutoff K must be >= 1");
  const auto& lat = field.lattice();
  const double k2max = wick_cutoff * wick_cutoff;
  double s = 0.0;
  for (std::size_t j = 0; j < lat.half_size(); ++j) {
    const ModeIndex k = lat.half_mode(j);
    if (k.norm_sq() > k2max) continue;
    s += (std::norm(field.half()[j]) - 1.0) / k.norm_sq();
  }
  return s;
}

/// E_N^c = 1/2 sum_{k in Lambda_N} (|omega_k|^2 - 1) / |k|^2.
inline double centred_lattice_energy(const SpectralField& field) {
  const auto& lat = field.lattice();
  double s = 0.0;
  for (std::size_t j = 0; j < lat.half_size(); ++j) {
    s += (std::norm(field.half()[j]) - 1.0) / lat.half_mode(j).norm_sq();
  }
  return s;
}

/// Var(2 :E:_K) under white noise = 2 sum_{0 < |k| <= K} |k|^{-4}.
inline double wick_variance(double wick_cutoff) {
  if (!(wick_cutoff >= 1.0)) throw std::invalid_argument("Wick cutoff K must be >= 1");
  double s = 0.0;
  for (const ModeIndex k : half_ball(wick_cutoff)) {
    const double k2 = k.norm_sq();
    s += 1.0 / (k2 * k2);
  }
  return 4.0 * s;  // half-lattice sum counts each conjugate pair once
}

/// exp(-beta :E:_K(omega)) / Z_{beta,K}.
inline double gibbs_weight(const SpectralField& field, double beta, double wick_cutoff) {
  require_admissible_beta(beta);
  if (!(wick_cutoff >= 1.0)) throw std::invalid_argument("Wick cutoff K must be >= 1");
  if (static_cast<int>(std::floor(wick_cutoff)) > field.lattice().cutoff()) {
    throw std::invalid_argument("Wick ball of radius " + std::to_string(wick_cutoff) +
                                " is not contained in Lambda_N with N=" + std::to_string(field.lattice().cutoff()));
  }
  const double exponent = -beta * renormalized_energy(field, wick_cutoff);
  if (exponent > 700.0) {
    throw std::overflow_error("Gibbs weight exponent " + std::to_string(exponent) + " exceeds 700");
  }
  return std::exp(exponent) / truncated_partition_function(beta, wick_cutoff);
}

// ---------------------------------------------------------------------------
// Single-mode marginal histograms and divergence estimators.

/// 2D histogram of (Re omega_k, Im omega_k) on [-L, L]^2, L = extent_sds * sd,
/// sd the per-component reference standard deviation. Samples outside the box
/// are clamped into the boundary bins.
class MarginalHistogram {
 public:
  MarginalHistogram(ModeIndex mode, double component_sd, std::size_t bins = 64, double extent_sds = 6.0)
      : mode_(mode), sd_(component_sd), bins_(bins), half_width_(extent_sds * component_sd),
        counts_(bins * bins, 0) {
    if (bins < 4) throw std::invalid_argument("histogram needs at least 4 bins per axis");
    if (!(component_sd > 0.0)) throw std::invalid_argument("histogram reference sd must be positive");
    if (extent_sds < 6.0) throw std::invalid_argument("histogram extent must cover >= 6 reference sds");
  }

  /// Histogram matched to the reference marginal of `mode` under `reference`.
  static MarginalHistogram for_reference(ModeIndex mode, const MeasureSpec& reference, std::size_t bins = 64) {
    return MarginalHistogram(mode, std::sqrt(0.5 * reference.mode_variance(mode)), bins);
  }

  void add(Complex z) noexcept {
    ++counts_[bin_of(z.real()) * bins_ + bin_of(z.imag())];
    ++total_;
  }

  void merge(const MarginalHistogram& o) {
    if (o.bins_ != bins_ || o.half_width_ != half_width_ || !(o.mode_ == mode_)) {
      throw std::invalid_argument("cannot merge histograms with different geometry");
    }
    for (std::size_t p = 0; p < counts_.size(); ++p) counts_[p] += o.counts_[p];
    total_ += o.total_;
  }

  ModeIndex mode() const noexcept { return mode_; }
  std::size_t bins() const noexcept { return bins_; }
  std::size_t total() const noexcept { return total_; }
  double component_sd() const noexcept { return sd_; }
  double half_width() const noexcept { return half_width_; }
  double bin_width() const noexcept { return 2.0 * half_width_ / static_cast<double>(bins_); }
  std::size_t count(std::size_t i, std::size_t j) const { return counts_.at(i * bins_ + j); }
  double bin_center(std::size_t i) const noexcept {
    return -half_width_ + (static_cast<double>(i) + 0.5) * bin_width();
  }

  double boundary_fraction() const noexcept {
    if (total_ == 0) return 0.0;
    std::size_t edge = 0;
    for (std::size_t i = 0; i < bins_; ++i) {
      for (std::size_t j = 0; j < bins_; ++j) {
        if (i == 0 || j == 0 || i + 1 == bins_ || j + 1 == bins_) edge += counts_[i * bins_ + j];
      }
    }
    return static_cast<double>(edge) / static_cast<double>(total_);
  }

  /// Per-bin probabilities of N(0, sd^2) x N(0, sd^2), boundary bins extended to infinity.
  std::vector<double> reference_probabilities(double reference_sd) const {
    std::vector<double> axis(bins_);
    for (std::size_t i = 0; i < bins_; ++i) {
      const double lo = i == 0 ? -INFINITY : -half_width_ + static_cast<double>(i) * bin_width();
      const double hi = i + 1 == bins_ ? INFINITY : -half_width_ + static_cast<double>(i + 1) * bin_width();
      axis[i] = normal_cdf(hi / reference_sd) - normal_cdf(lo / reference_sd);
    }
    std::vector<double> p(bins_ * bins_);
    for (std::size_t i = 0; i < bins_; ++i) {
      for (std::size_t j = 0; j < bins_; ++j) p[i * bins_ + j] = axis[i] * axis[j];
    }
    return p;
  }

 private:
  std::size_t bin_of(double v) const noexcept {
    const double r = (v + half_width_) / bin_width();
    if (!(r >= 1.0)) return 0;
    const auto b = static_cast<std::size_t>(r);
    return std::min(b, bins_ - 1);
  }

  ModeIndex mode_;
  double sd_;
  std::size_t bins_;
  double half_width_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

inline constexpr std::size_t kMinHistogramTotal = 10'000;
inline constexpr double kMaxBoundaryFraction = 0.2;
/// Bins with fewer expected reference counts are pooled into one tail cell.
inline constexpr double kMinExpectedCount = 5.0;

struct MarginalDivergences {
  double kl = 0.0;
  double chi2 = 0.0;
  double l1 = 0.0;
  std::size_t cells = 0;
};

/// Empirical cell frequencies against the reference marginal over the
/// partition obtained by pooling low-expectation bins. Coarsening a partition
/// never increases a divergence, so envelope bounds carry over.
inline MarginalDivergences marginal_divergences(const MarginalHistogram& hist, const MeasureSpec& reference) {
  reference.validate();
  if (hist.total() < kMinHistogramTotal) {
    throw std::invalid_argument("histogram total " + std::to_string(hist.total()) + " below 1e4");
  }
  if (hist.boundary_fraction() > kMaxBoundaryFraction) {
    throw std::domain_error("histogram has more than 20% of its mass in boundary bins");
  }
  const double ref_sd = std::sqrt(0.5 * reference.mode_variance(hist.mode()));
  const auto q = hist.reference_probabilities(ref_sd);
  const double n = static_cast<double>(hist.total());
  MarginalDivergences d;
  double tail_p = 0.0, tail_q = 0.0;
  CompensatedSum kl, chi2, l1;
  auto accumulate = [&](double p, double qq) {
    if (qq <= 0.0) return;
    ++d.cells;
    if (p > 0.0) kl.add(p * std::log(p / qq));
    chi2.add((p - qq) * (p - qq) / qq);
    l1.add(std::abs(p - qq));
  };
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    for (std::size_t j = 0; j < hist.bins(); ++j) {
      const double p = static_cast<double>(hist.count(i, j)) / n;
      const double qq = q[i * hist.bins() + j];
      if (qq * n < kMinExpectedCount) {
        tail_p += p;
        tail_q += qq;
      } else {
        accumulate(p, qq);
      }
    }
  }
  accumulate(tail_p, tail_q);
  d.kl = std::max(0.0, kl.value());
  d.chi2 = chi2.value();
  d.l1 = l1.value();
  return d;
}

inline double marginal_relative_entropy(const MarginalHistogram& hist, const MeasureSpec& reference) {
  return marginal_divergences(hist, reference).kl;
}
inline double marginal_chi_squared(const MarginalHistogram& hist, const MeasureSpec& reference) {
  return marginal_divergences(hist, reference).chi2;
}
/// ||marginal density - 1||_{L^1(reference)}.
inline double marginal_total_variation(const MarginalHistogram& hist, const MeasureSpec& reference) {
  return marginal_divergences(hist, reference).l1;
}

/// Estimator bias thresholds: mean + 4 sd of each estimator over reference
/// samples at the given sample size.
struct EstimatorBias {
  double kl = 0.0;
  double chi2 = 0.0;
  double l1 = 0.0;
  std::size_t replicas = 0;
  std::size_t total = 0;
};

inline EstimatorBias calibrate_bias(ModeIndex mode, const MeasureSpec& reference, std::size_t total,
                                    RandomSource& rng, std::size_t replicas = 20, std::size_t bins = 64) {
  if (replicas < 2) throw std::invalid_argument("bias calibration needs at least two replicas");
  const double sd = std::sqrt(reference.mode_variance(mode));
  std::vector<double> kl, chi2, l1;
  for (std::size_t r = 0; r < replicas; ++r) {
    auto hist = MarginalHistogram::for_reference(mode, reference, bins);
    for (std::size_t i = 0; i < total; ++i) hist.add(sd * rng.complex_normal());
    const auto d = marginal_divergences(hist, reference);
    kl.push_back(d.kl);
    chi2.push_back(d.chi2);
    l1.push_back(d.l1);
  }
  auto threshold = [](const std::vector<double>& v) {
    const auto m = sample_moments(v);
    return m.mean + 4.0 * std::sqrt(m.variance);
  };
  return {threshold(kl), threshold(chi2), threshold(l1), replicas, total};
}

struct KullbackReport {
  double total_variation = 0.0;  // L^1 distance of densities
  double kl = 0.0;
  double chi2 = 0.0;
  double bound = 0.0;  // sqrt(2 entropy_bound) + delta
  bool within_bound = false;
  bool pinsker_consistent = false;  // TV <= sqrt(2 KL) + delta
  bool chi2_consistent = false;     // TV <= sqrt(chi2) + delta
  bool pass() const noexcept { return within_bound && pinsker_consistent && chi2_consistent; }
};

inline KullbackReport kullback_check(const MarginalHistogram& hist, const MeasureSpec& reference,
                                     double entropy_bound, double delta) {
  if (entropy_bound < 0.0) throw std::invalid_argument("entropy bound must be >= 0");
  const auto d = marginal_divergences(hist, reference);
  KullbackReport r;
  r.total_variation = d.l1;
  r.kl = d.kl;
  r.chi2 = d.chi2;
  r.bound = std::sqrt(2.0 * entropy_bound) + delta;
  r.within_bound = d.l1 <= r.bound;
  r.pinsker_consistent = d.l1 <= std::sqrt(2.0 * d.kl) + delta;
  r.chi2_consistent = d.l1 <= std::sqrt(d.chi2) + delta;
  return r;
}

// ---------------------------------------------------------------------------
// Invariance diagnostics.

struct InvarianceReport {
  SampleMoments energy_moment;  // E_{mu_N}[E_N <-b_N, grad phi>]
  SampleMoments gibbs_moment;   // E_{mu_N}[exp(-beta E_N^c) <-b_N, grad phi>]
  double partition = 1.0;
  bool exact_zero = false;
  double energy_z() const { return exact_zero ? 0.0 : energy_moment.z_score(0.0); }
  double gibbs_z() const { return exact_zero ? 0.0 : gibbs_moment.z_score(0.0); }
  bool pass(double z_max = 4.0) const { return std::abs(energy_z()) < z_max && std::abs(gibbs_z()) < z_max; }
};

namespace detail {

inline double transport_term(const CylinderFunction& phi, const GalerkinDrift& drift, const SpectralField& xi) {
  const auto x = to_chart(xi);
  const auto b = to_chart(drift(xi));
  double s = 0.0;
  for (const auto& [j, g] : phi.gradient(x)) s -= b.at(j) * g;
  return s;
}

}  // namespace detail

/// The Gibbs expectation is computed as Z_N(beta) E_{mu_{N,beta}}[<-b_N, grad phi>]
/// with exact draws from mu_{N,beta} = exp(-beta E_N^c) mu_N / Z_N; the direct
/// importance weight has infinite variance for beta < 0.
inline InvarianceReport infinitesimal_invariance_check(const CylinderFunction& phi, double beta,
                                                       const LatticePtr& lattice, RandomSource& rng,
                                                       std::size_t samples) {
  require_admissible_beta(beta);
  if (samples < 10'000) throw std::invalid_argument("infinitesimal invariance needs at least 1e4 samples");
  for (const std::size_t j : phi.support()) {
    if (j >= lattice->size()) throw std::invalid_argument("cylinder function uses coordinates outside Lambda_N");
  }
  InvarianceReport rep;
  rep.partition = lattice_partition_function(beta, *lattice);
  if (phi.is_constant()) {
    rep.exact_zero = true;
    rep.energy_moment.count = rep.gibbs_moment.count = 0;
    return rep;
  }
  const GalerkinDrift drift(lattice);
  const MeasureSpec gibbs{beta, lattice->cutoff()};
  std::vector<double> e(samples), g(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const SpectralField w = sample_white_noise(lattice, rng);
    e[i] = energy(w) * detail::transport_term(phi, drift, w);
    const SpectralField v = sample_energy_enstrophy(gibbs, lattice, rng);
    g[i] = rep.partition * detail::transport_term(phi, drift, v);
  }
  rep.energy_moment = sample_moments(e);
  rep.gibbs_moment = sample_moments(g);
  return rep;
}

/// Per-time, per-mode statistics of |omega_k|^2 over an ensemble.
struct ModeVarianceTable {
  std::vector<double> times;
  std::vector<ModeIndex> modes;
  std::vector<std::vector<SampleMoments>> stats;  // [time][mode]
};

/// z-scores of the ensemble mean of |omega_k|^2 against |k|^2 / (beta + |k|^2).
inline std::vector<ReportRow> stationarity_test(const ModeVarianceTable& table, const MeasureSpec& reference,
                                                double z_max = 4.0) {
  reference.validate();
  std::vector<ReportRow> rows;
  for (std::size_t t = 0; t < table.times.size(); ++t) {
    for (std::size_t m = 0; m < table.modes.size(); ++m) {
      const double z = table.stats[t][m].z_score(reference.mode_variance(table.modes[m]));
      rows.push_back({table.times[t], table.modes[m], "variance_z", z, z_max, std::abs(z) < z_max});
    }
  }
  return rows;
}

}  // namespace stocheuler
