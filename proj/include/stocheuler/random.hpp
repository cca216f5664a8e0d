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

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace stocheuler {

/// Philox4x32-10 block function (Salmon et al., Random123).
///
/// Counter-based: the output is a pure function of (counter, key), so any
/// block of any stream can be produced without touching shared state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// A reproducible random stream identified by (seed, stream_index).
///
/// The seed is the Philox key and the stream index occupies the upper half of
/// the 128-bit counter, so distinct stream indices never share a block. Every
/// draw consumes whole blocks; normals come from Box-Muller on one block, so a
/// complex normal is exactly one block and the output sequence does not depend
/// on how draws are interleaved between real and complex requests.
class RandomSource {
 public:
  RandomSource(std::uint64_t seed, std::uint64_t stream_index) noexcept
      : seed_(seed), stream_(stream_index) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_index() const noexcept { return stream_; }
  std::uint64_t position() const noexcept { return counter_; }

  /// Raw 128-bit block as two 64-bit words.
  std::array<std::uint64_t, 2> next_block() noexcept {
    const Philox4x32::Counter ctr{
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed_),
                              static_cast<std::uint32_t>(seed_ >> 32)};
    ++counter_;
    const auto out = Philox4x32::block(ctr, key);
    return {(std::uint64_t{out[1]} << 32) | out[0], (std::uint64_t{out[3]} << 32) | out[2]};
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept { return to_unit(next_block()[0]); }

  /// Standard complex Gaussian (g1 + i g2) / sqrt(2), so E|z|^2 = 1.
  std::complex<double> complex_normal() noexcept {
    const auto [a, b] = standard_normal_pair();
    return {a * (std::numbers::sqrt2 / 2), b * (std::numbers::sqrt2 / 2)};
  }

  /// Two independent standard normals from one block.
  std::array<double, 2> standard_normal_pair() noexcept {
    const auto words = next_block();
    const double u1 = to_unit(words[0]);
    const double u2 = to_unit(words[1]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  double normal() noexcept { return standard_normal_pair()[0]; }

 private:
  static double to_unit(std::uint64_t x) noexcept {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace stocheuler
