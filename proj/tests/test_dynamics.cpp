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

#include <cmath>
#include <numbers>
#include <vector>

#include "stocheuler/dynamics.hpp"
#include "stocheuler/measures.hpp"
#include "stocheuler/observables.hpp"
#include "stocheuler/stats.hpp"

using namespace stocheuler;
using Catch::Approx;

namespace {

SpectralField random_field(int n, std::uint64_t stream, double scale = 1.0) {
  RandomSource rng(77, stream);
  return scale * sample_white_noise(build_lattice(n), rng);
}

double max_abs_diff(const SpectralField& a, const SpectralField& b) {
  double d = 0;
  for (std::size_t j = 0; j < a.half().size(); ++j) d = std::max(d, std::abs(a.half()[j] - b.half()[j]));
  return d;
}

// Galerkin projection of u . grad(omega), formed pointwise on an M x M grid
// with M > 3N so the quadratic product is resolved without aliasing.
SpectralField advection_on_grid(const SpectralField& w) {
  const auto& lat = w.lattice();
  const std::size_t m = 3 * static_cast<std::size_t>(lat.cutoff()) + 2;
  const auto coeffs = w.full();
  std::vector<double> u1(m * m), u2(m * m), g1(m * m), g2(m * m);
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = 0; q < m; ++q) {
      const double x1 = 2 * std::numbers::pi * p / m, x2 = 2 * std::numbers::pi * q / m;
      Complex a1{}, a2{}, b1{}, b2{};
      for (std::size_t i = 0; i < lat.size(); ++i) {
        const ModeIndex k = lat.mode(i);
        const Complex e = coeffs[i] * std::polar(1.0, k.kx * x1 + k.ky * x2);
        // u = i k^perp omega / |k|^2 with k^perp = (k2, -k1)
        a1 += Complex(0, 1) * double(k.ky) / double(k.norm_sq()) * e;
        a2 += Complex(0, 1) * double(-k.kx) / double(k.norm_sq()) * e;
        b1 += Complex(0, 1) * double(k.kx) * e;
        b2 += Complex(0, 1) * double(k.ky) * e;
      }
      u1[p * m + q] = a1.real();
      u2[p * m + q] = a2.real();
      g1[p * m + q] = b1.real();
      g2[p * m + q] = b2.real();
    }
  }
  SpectralField out(w.lattice_ptr());
  for (const ModeIndex n : lat.half()) {
    Complex c{};
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = 0; q < m; ++q) {
        const double x1 = 2 * std::numbers::pi * p / m, x2 = 2 * std::numbers::pi * q / m;
        const double f = u1[p * m + q] * g1[p * m + q] + u2[p * m + q] * g2[p * m + q];
        c += f * std::polar(1.0, -(n.kx * x1 + n.ky * x2));
      }
    }
    out.set(n, c / double(m * m));
  }
  return out;
}

// Real-chart divergence of a vector field by central differences; exact up to
// round-off for quadratic fields.
template <class F>
double numerical_divergence(const SpectralField& xi, F&& f, double h = 1e-3) {
  const auto x = to_chart(xi);
  double div = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    auto xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const auto bp = to_chart(f(from_chart(xi.lattice_ptr(), xp)));
    const auto bm = to_chart(f(from_chart(xi.lattice_ptr(), xm)));
    div += (bp[j] - bm[j]) / (2 * h);
  }
  return div;
}

}  // namespace

TEST_CASE("hand-computed drift component") {
  const auto lat = build_lattice(2);
  SpectralField xi(lat);
  xi.set(ModeIndex{1, 0}, 1.0);
  xi.set(ModeIndex{1, 1}, 1.0);
  const auto b = eval_drift(xi).value;
  CHECK(std::abs(b.at({2, 1}) - Complex(0.5, 0.0)) <= 1e-12);
  CHECK(std::abs(GalerkinDrift(lat)(xi).at({2, 1}) - Complex(0.5, 0.0)) <= 1e-12);
}

TEST_CASE("a single conjugate pair has zero drift") {
  const auto lat = build_lattice(3);
  for (const ModeIndex k : {ModeIndex{1, 0}, ModeIndex{2, -1}, ModeIndex{3, 3}}) {
    SpectralField xi(lat);
    xi.set(k, {0.7, -1.9});
    CHECK(hnorm_sq(eval_drift(xi).value) == 0.0);
    CHECK(hnorm_sq(GalerkinDrift(lat)(xi)) == 0.0);
  }
}

TEST_CASE("triad table agrees with the direct double sum") {
  for (int n : {1, 2, 3, 6}) {
    const GalerkinDrift drift(build_lattice(n));
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto xi = random_field(n, s, 2.0);
      const auto ref = eval_drift(xi).value;
      CHECK(max_abs_diff(drift(xi), ref) <= 1e-12 * (1 + hnorm_sq(xi)));
    }
  }
}

TEST_CASE("drift equals the projected advection term") {
  for (int n : {1, 2, 4}) {
    const auto xi = random_field(n, 100 + n);
    CHECK(max_abs_diff(eval_drift(xi).value, advection_on_grid(xi)) <= 1e-11 * (1 + hnorm_sq(xi)));
  }
}

TEST_CASE("drift orthogonality and divergence") {
  for (int n : {2, 3, 4}) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto xi = random_field(n, 200 + s, 3.0);
      const double norm = std::sqrt(hnorm_sq(xi));
      CHECK(std::abs(eval_drift(xi).pairing_with_input) <= 1e-10 * (1 + norm * norm * norm));
      CHECK(std::abs(drift_divergence(xi)) <= 1e-10 * (1 + norm));
    }
  }
  const auto zero = SpectralField(build_lattice(3));
  CHECK(drift_divergence(zero) == 0.0);
  CHECK(eval_drift(zero).pairing_with_input == 0.0);
}

TEST_CASE("drift divergence agrees with finite differences") {
  const auto xi = random_field(2, 300, 1.5);
  const double fd = numerical_divergence(xi, [](const SpectralField& f) { return eval_drift(f).value; });
  CHECK(std::abs(fd) < 1e-8);
  CHECK(std::abs(drift_divergence(xi) - fd) < 1e-8);
  // Non-zero control: the OU drift -xi has divergence -dim.
  const double ou = numerical_divergence(xi, [](const SpectralField& f) { return -1.0 * f; });
  CHECK(ou == Approx(-double(xi.size())).epsilon(1e-9));
}

TEST_CASE("divergence_check on random trials") {
  RandomSource rng(5, 0);
  const auto rep = divergence_check(build_lattice(3), rng, 100);
  CHECK(rep.trials == 100);
  CHECK(rep.max_divergence_scaled <= 1e-10);
  CHECK(rep.max_pairing_scaled <= 1e-10);
  CHECK_THROWS_AS(divergence_check(build_lattice(3), rng, 0), std::invalid_argument);
}

TEST_CASE("cutoff drift") {
  const auto xi = random_field(3, 400);
  const double norm = std::sqrt(hnorm_sq(xi));
  const auto ref = eval_drift(xi).value;
  CHECK(eval_cutoff_drift(xi, {norm * 1.01}).value == ref);
  CHECK(hnorm_sq(eval_cutoff_drift(xi, {norm / 2.0}).value) == 0.0);
  const auto mid = eval_cutoff_drift(xi, {norm / 1.5}).value;
  const double ratio = std::sqrt(hnorm_sq(mid) / hnorm_sq(ref));
  CHECK(ratio > 0.0);
  CHECK(ratio < 1.0);
  CHECK(max_abs_diff(mid, ratio * ref) < 1e-12 * std::sqrt(hnorm_sq(ref)));
  CHECK_THROWS_AS(eval_cutoff_drift(xi, {0.0}), std::invalid_argument);

  const CutoffSpec c{norm / 1.4};
  const double fd = numerical_divergence(
      xi, [&](const SpectralField& f) { return eval_cutoff_drift(f, c).value; }, 1e-4);
  CHECK(std::abs(fd) < 1e-6);
  CHECK(std::abs(cutoff_drift_divergence(xi, c)) < 1e-10 * (1 + norm));
}

TEST_CASE("cutoff profile is C1 and monotone") {
  double prev = 1.0;
  for (int i = 0; i <= 300; ++i) {
    const double r = i * 0.01;
    const double v = CutoffSpec::profile(r);
    CHECK(v <= prev);
    CHECK(v >= 0.0);
    prev = v;
    const double h = 1e-6;
    if (r > 0.01 && r < 2.99) {
      CHECK(CutoffSpec::profile_derivative(r) ==
            Approx((CutoffSpec::profile(r + h) - CutoffSpec::profile(r - h)) / (2 * h)).margin(1e-6));
    }
  }
}

TEST_CASE("rk4 leaves a single pair unchanged") {
  const auto lat = build_lattice(2);
  SpectralField xi(lat);
  xi.set(ModeIndex{2, -1}, {1.5, 0.5});
  SpectralField y = xi;
  for (int i = 0; i < 100; ++i) y = step_deterministic(y, {0.01, Scheme::ExplicitRk4, 0.0, 1.0});
  CHECK(y == xi);
}

TEST_CASE("rk4 is fourth order") {
  const auto xi = random_field(3, 500, 0.8);
  auto solve = [&](double dt) {
    Integrator integ(xi.lattice_ptr(), {dt, Scheme::ExplicitRk4, 0.0, 1.0});
    std::vector<Complex> s(xi.half().begin(), xi.half().end());
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    for (int i = 0; i < steps; ++i) integ.step(s, nullptr);
    return SpectralField::from_half(xi.lattice_ptr(), s);
  };
  const auto a = solve(0.1), b = solve(0.05), c = solve(0.025);
  const double order = std::log2(max_abs_diff(a, b) / max_abs_diff(b, c));
  CHECK(order >= 3.8);
}

TEST_CASE("rk4 conserves enstrophy and energy") {
  const auto xi = random_field(4, 600);
  Integrator integ(xi.lattice_ptr(), {1e-3, Scheme::ExplicitRk4, 0.0, 1.0});
  std::vector<Complex> s(xi.half().begin(), xi.half().end());
  for (int i = 0; i < 1000; ++i) integ.step(s, nullptr);
  const auto y = SpectralField::from_half(xi.lattice_ptr(), s);
  CHECK(std::abs(enstrophy(y) / enstrophy(xi) - 1) < 1e-9);
  CHECK(std::abs(energy(y) / energy(xi) - 1) < 1e-9);
  CHECK(max_abs_diff(y, xi) > 1e-3);  // the flow did move
}

TEST_CASE("em at alpha = 0 is explicit Euler") {
  const auto xi = random_field(2, 700);
  RandomSource rng(1, 0);
  const auto y = step_stochastic(xi, {0.01, Scheme::EulerMaruyama, 0.0, 1.0}, rng);
  const auto b = eval_drift(xi).value;
  SpectralField expect(xi.lattice_ptr());
  for (std::size_t j = 0; j < xi.half().size(); ++j) expect.half()[j] = xi.half()[j] - 0.01 * b.half()[j];
  CHECK(max_abs_diff(y, expect) < 1e-15);
  CHECK(rng.position() == 0);
}

TEST_CASE("ou-split second-moment law") {
  const auto lat = build_lattice(1);
  const double alpha = 0.5, t = 2.0, dt = 1e-2;
  std::vector<double> h(4000);
  for (std::size_t i = 0; i < h.size(); ++i) {
    RandomSource rng(8, i);
    Integrator integ(lat, {dt, Scheme::OuSplit, alpha, t});
    std::vector<Complex> s(lat->half_size());
    for (int k = 0; k < 200; ++k) integ.step(s, &rng);
    h[i] = hnorm_sq(SpectralField::from_half(lat, s));
  }
  CHECK(std::abs(sample_moments(h).z_score(8 * (1 - std::exp(-2 * alpha * t)))) < 4.0);
}

TEST_CASE("integrator argument checks and overflow guard") {
  const auto xi = random_field(2, 800);
  RandomSource rng(0, 0);
  CHECK_THROWS_AS(step_deterministic(xi, {0.01, Scheme::ExplicitRk4, 1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(step_deterministic(xi, {0.01, Scheme::OuSplit, 0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(step_stochastic(xi, {0.01, Scheme::ExplicitRk4, 0.0, 1.0}, rng), std::invalid_argument);
  CHECK_THROWS_AS(step_stochastic(xi, {-0.01, Scheme::OuSplit, 0.0, 1.0}, rng), std::invalid_argument);
  CHECK_THROWS_AS(step_stochastic(xi, {0.01, Scheme::OuSplit, -1.0, 1.0}, rng), std::invalid_argument);
  Integrator integ(xi.lattice_ptr(), {0.01, Scheme::OuSplit, 1.0, 1.0});
  CHECK_THROWS_AS(integ.step(xi, nullptr), std::invalid_argument);
  CHECK(parse_scheme("rk4") == Scheme::ExplicitRk4);
  CHECK_THROWS_AS(parse_scheme("leapfrog"), std::invalid_argument);

  const auto big = random_field(8, 900, 50.0);
  Integrator em(big.lattice_ptr(), {0.5, Scheme::EulerMaruyama, 0.0, 100.0});
  std::vector<Complex> s(big.half().begin(), big.half().end());
  CHECK_THROWS_AS(
      [&] {
        for (int i = 0; i < 200; ++i) em.step(s, &rng);
      }(),
      OverflowError);
}
