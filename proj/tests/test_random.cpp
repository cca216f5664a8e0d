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
#include <vector>

#include "stocheuler/parallel.hpp"
#include "stocheuler/random.hpp"
#include "stocheuler/stats.hpp"

using namespace stocheuler;

// Published Philox4x32-10 known-answer vectors.
TEST_CASE("philox known answers") {
  using P = Philox4x32;
  CHECK(P::block({0, 0, 0, 0}, {0, 0}) == P::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(P::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        P::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(P::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        P::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("same seed and stream give the same sequence") {
  RandomSource a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_block();
    CHECK(x == b.next_block());
    CHECK(x != c.next_block());
    CHECK(x != d.next_block());
  }
}

TEST_CASE("uniforms stay inside the open unit interval") {
  RandomSource rng(1, 0);
  std::vector<double> u(200'000);
  for (auto& x : u) {
    x = rng.uniform();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
  }
  const auto m = sample_moments(u);
  CHECK(std::abs(m.z_score(0.5)) < 4.0);
  CHECK(m.variance == Catch::Approx(1.0 / 12.0).epsilon(0.01));
}

TEST_CASE("complex normals have unit second moment and independent parts") {
  RandomSource rng(3, 1);
  const std::size_t n = 200'000;
  std::vector<double> re(n), im(n), abs2(n), cross(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = rng.complex_normal();
    re[i] = z.real();
    im[i] = z.imag();
    abs2[i] = std::norm(z);
    cross[i] = z.real() * z.imag();
  }
  CHECK(std::abs(sample_moments(re).z_score(0.0)) < 4.0);
  CHECK(std::abs(sample_moments(im).z_score(0.0)) < 4.0);
  CHECK(std::abs(sample_moments(abs2).z_score(1.0)) < 4.0);
  CHECK(std::abs(sample_moments(cross).z_score(0.0)) < 4.0);
}

TEST_CASE("normal tail frequencies match the Gaussian cdf") {
  RandomSource rng(5, 0);
  const std::size_t n = 400'000;
  std::size_t below = 0;
  for (std::size_t i = 0; i < n; ++i) below += rng.normal() < -1.5;
  const double p = normal_cdf(-1.5);
  const double se = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(static_cast<double>(below) / n - p) < 4 * se);
}

TEST_CASE("a complex normal consumes exactly one block") {
  RandomSource a(9, 2), b(9, 2);
  (void)a.complex_normal();
  (void)b.next_block();
  CHECK(a.position() == b.position());
  CHECK(a.next_block() == b.next_block());
}

TEST_CASE("parallel_for is independent of worker count") {
  auto run = [](unsigned workers) {
    std::vector<double> out(1000);
    parallel_for(out.size(), workers, [&](std::size_t i) {
      RandomSource rng(11, i);
      double s = 0;
      for (int k = 0; k < 10; ++k) s += rng.normal();
      out[i] = s;
    });
    return out;
  };
  const auto ref = run(1);
  CHECK(run(2) == ref);
  CHECK(run(8) == ref);
}

TEST_CASE("parallel_for propagates exceptions") {
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [](std::size_t i) {
                                 if (i == 37) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("line fit recovers an exact slope") {
  std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = fit_line(x, y);
  CHECK(f.slope == Catch::Approx(2.0));
  CHECK(f.intercept == Catch::Approx(1.0));
}
