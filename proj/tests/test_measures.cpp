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


#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "stocheuler/measures.hpp"
#include "stocheuler/observables.hpp"
#include "stocheuler/stats.hpp"

using namespace stocheuler;
using Catch::Approx;

namespace {

std::size_t slot(const ModeLattice& lat, ModeIndex k) { return lat.half_slot(lat.index_of(k)); }

// Kolmogorov-Smirnov statistic of xs against the standard normal cdf.
double ks_statistic(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

}  // namespace

TEST_CASE("white noise moments") {
  const auto lat = build_lattice(2);
  RandomSource rng(1, 0);
  const std::size_t n = 100'000;
  const std::size_t j = slot(*lat, {1, 1});
  std::vector<double> abs2(n), re(n), im(n), h(n);
  const auto lat1 = build_lattice(1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = sample_white_noise(lat, rng);
    abs2[i] = std::norm(w.half()[j]);
    re[i] = w.half()[j].real();
    im[i] = w.half()[j].imag();
    h[i] = hnorm_sq(sample_white_noise(lat1, rng));
  }
  CHECK(std::abs(sample_moments(abs2).mean - 1.0) < 0.01);
  CHECK(std::abs(sample_moments(re).mean) < 3 / std::sqrt(double(n)));
  CHECK(std::abs(sample_moments(im).mean) < 3 / std::sqrt(double(n)));
  CHECK(std::abs(sample_moments(h).z_score(8.0)) < 4.0);
}

TEST_CASE("energy-enstrophy mode variances") {
  const auto lat = build_lattice(2);
  for (double beta : {-0.5, 0.0, 1.0, 3.0}) {
    RandomSource rng(2, static_cast<std::uint64_t>(10 * (beta + 1)));
    const MeasureSpec spec{beta, 2};
    const std::size_t n = 100'000;
    std::vector<std::vector<double>> re(lat->half_size()), im(lat->half_size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto w = sample_energy_enstrophy(spec, lat, rng);
      for (std::size_t j = 0; j < lat->half_size(); ++j) {
        re[j].push_back(w.half()[j].real() * w.half()[j].real());
        im[j].push_back(w.half()[j].imag() * w.half()[j].imag());
      }
    }
    for (std::size_t j = 0; j < lat->half_size(); ++j) {
      const ModeIndex k = lat->half_mode(j);
      const double expected = k.norm_sq() / (2 * (beta + k.norm_sq()));
      CHECK(std::abs(sample_moments(re[j]).z_score(expected)) < 4.0);
      CHECK(std::abs(sample_moments(im[j]).z_score(expected)) < 4.0);
    }
  }
  CHECK(MeasureSpec{3.0, 1}.mode_variance({1, 0}) == 0.25);
  CHECK(MeasureSpec{-0.5, 1}.mode_variance({1, 1}) == Approx(4.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("beta = 0 reproduces white noise draw for draw") {
  const auto lat = build_lattice(3);
  RandomSource a(5, 1), b(5, 1);
  for (int i = 0; i < 10; ++i) CHECK(sample_energy_enstrophy({0.0, 3}, lat, a) == sample_white_noise(lat, b));
}

TEST_CASE("beta guard") {
  const auto lat = build_lattice(1);
  RandomSource rng(0, 0);
  CHECK_THROWS_AS(sample_energy_enstrophy({-1.0, 1}, lat, rng), std::domain_error);
  CHECK_THROWS_AS(sample_energy_enstrophy({-1.5, 1}, lat, rng), std::domain_error);
  CHECK_THROWS_AS(sample_energy_enstrophy({-1.0 + 5e-7, 1}, lat, rng), std::domain_error);
  CHECK_NOTHROW(sample_energy_enstrophy({-1.0 + 2e-6, 1}, lat, rng));
}

TEST_CASE("characteristic functional") {
  const auto lat = build_lattice(2);
  SpectralField f(lat);
  CHECK(characteristic_functional({1.0, 2}, f) == 1.0);
  f.set(ModeIndex{1, 0}, {0.3, 0.4});
  f.set(ModeIndex{0, 2}, {std::sqrt(0.25), 0.0});  // hnorm_sq = 2 (0.25 + 0.25) = 1
  REQUIRE(hnorm_sq(f) == Approx(1.0).epsilon(1e-15));
  CHECK(characteristic_functional({0.0, 2}, f) == Approx(std::exp(-0.5)).epsilon(1e-15));

  RandomSource frng(7, 0);
  const auto g = 0.6 * sample_white_noise(lat, frng);
  for (double beta : {-0.5, 0.0, 1.0, 3.0}) {
    RandomSource rng(7, 1 + static_cast<std::uint64_t>(2 * (beta + 1)));
    std::vector<double> c(100'000);
    for (auto& v : c) v = std::cos(l2_pairing(sample_energy_enstrophy({beta, 2}, lat, rng), g));
    CHECK(std::abs(sample_moments(c).z_score(characteristic_functional({beta, 2}, g))) < 3.0);
  }
}

TEST_CASE("truncated partition function") {
  CHECK(truncated_partition_function(0.0, 7.3) == 1.0);
  CHECK(truncated_partition_function(1.0, 1.0) == Approx(std::pow(std::numbers::e / 2, 2)).epsilon(1e-14));
  CHECK(truncated_partition_function(1.0, 1.0) == Approx(1.84726).epsilon(1e-5));
  CHECK_THROWS_AS(truncated_partition_function(1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(truncated_partition_function(-1.5, 2.0), std::domain_error);

  const auto lat = build_lattice(1);
  RandomSource rng(8, 0);
  std::vector<double> w(1'000'000);
  for (auto& v : w) v = std::exp(-renormalized_energy(sample_white_noise(lat, rng), 1.0));
  CHECK(std::abs(sample_moments(w).z_score(truncated_partition_function(1.0, 1.0))) < 3.0);
}

TEST_CASE("half ball contents") {
  CHECK(half_ball(1.0).size() == 2);
  CHECK(half_ball(std::sqrt(2.0)).size() == 4);
  CHECK(half_ball(2.0).size() == 6);
  for (const auto k : half_ball(5.0)) {
    CHECK(k.in_upper_half());
    CHECK(k.norm_sq() <= 25);
  }
}

TEST_CASE("rejection sampler with a constant density is mu_N") {
  const auto lat = build_lattice(2);
  CylinderDensity one;
  one.support = {{1, 0}};
  one.evaluate = [](std::span<const double>) { return 1.0; };
  RandomSource rng(9, 0);
  std::vector<double> x(20'000);
  for (auto& v : x) v = std::numbers::sqrt2 * sample_cylinder_density(one, lat, rng).at({1, 0}).real();
  // 1% critical value of the one-sample KS statistic.
  CHECK(ks_statistic(x) < 1.628 / std::sqrt(double(x.size())));
}

TEST_CASE("rejection sampler reproduces the sine-tilted mean") {
  // Tilted mean of sin(x) under (1 + a sin x) N(0, 1), by trapezoid quadrature.
  const double a = 0.5;
  double oracle = 0;
  const int steps = 40'000;
  const double h = 20.0 / steps;
  for (int i = 0; i <= steps; ++i) {
    const double x = -10 + i * h;
    const double w = (i == 0 || i == steps ? 0.5 : 1.0) * h * std::exp(-x * x / 2) / std::sqrt(2 * std::numbers::pi);
    oracle += w * std::sin(x) * (1 + a * std::sin(x));
  }
  REQUIRE(oracle == Approx((1 - std::exp(-2.0)) / 4).epsilon(1e-10));

  const auto lat = build_lattice(2);
  const auto d = sine_tilt_density({1, 0}, a);
  RandomSource rng(10, 0);
  std::vector<double> s(100'000);
  for (auto& v : s) v = std::sin(std::numbers::sqrt2 * sample_cylinder_density(d, lat, rng).at({1, 0}).real());
  CHECK(std::abs(sample_moments(s).z_score(oracle)) < 3.0);
}

TEST_CASE("rejection acceptance rate equals mass over bound") {
  const auto lat = build_lattice(1);
  const auto d = gaussian_bump_density({1, 1}, 2.0, 0.7);
  RandomSource rng(11, 0);
  RejectionStats stats;
  for (int i = 0; i < 50'000; ++i) (void)sample_cylinder_density(d, lat, rng, stats);
  const double p = d.mass / d.bound;
  const double se = std::sqrt(p * (1 - p) / stats.proposals);
  CHECK(std::abs(stats.acceptance_rate() - p) < 4 * se);

  CylinderDensity mc = d;
  RandomSource nrng(12, 0);
  const double est = mc.normalize(nrng, 400'000);
  CHECK(est == Approx(d.mass).epsilon(0.01));
}

TEST_CASE("rejection sampler aborts on a hopeless bound") {
  const auto lat = build_lattice(1);
  const auto d = gaussian_bump_density({1, 0}, 1.0, 0.004);
  RandomSource rng(13, 0);
  RejectionStats stats;
  // Single draws still succeed; the rate is judged once 1e6 proposals have accumulated.
  CHECK_THROWS_AS(
      [&] {
        for (int i = 0; i < 1000; ++i) (void)sample_cylinder_density(d, lat, rng, stats);
      }(),
      std::runtime_error);
  CHECK(stats.proposals >= kRejectionProposalWindow);
  CHECK(stats.acceptance_rate() < kMinAcceptanceRate);
}

TEST_CASE("density descriptors reject bad parameters") {
  CHECK_THROWS_AS(sine_tilt_density({1, 0}, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(sine_tilt_density({-1, 0}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_bump_density({1, 0}, 0.0, 1.0), std::invalid_argument);
  const auto lat = build_lattice(1);
  RandomSource rng(0, 0);
  CHECK_THROWS_AS(sample_cylinder_density(sine_tilt_density({2, 0}, 0.5), lat, rng), std::invalid_argument);
}
