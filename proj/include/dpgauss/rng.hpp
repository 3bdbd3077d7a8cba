// Copyright 2026 The dpgauss Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPGAUSS_RNG_HPP_
#define DPGAUSS_RNG_HPP_

#include <cstdint>
#include <random>

namespace dpgauss {

using Engine = std::mt19937_64;

namespace internal {

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace internal

// A (seed, stream) pair naming one reproducible random stream. Handles are
// plain values: drawing from a handle never mutates it, so the same handle
// always yields the same sequence. Independent sub-streams are derived with
// Split(), which is how parallel trials and pipeline stages get disjoint
// randomness.
class RngHandle {
 public:
  constexpr RngHandle() = default;
  constexpr RngHandle(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  RngHandle Split(std::uint64_t child) const {
    return RngHandle(seed_, internal::SplitMix64(stream_ ^ internal::SplitMix64(child + 1)));
  }

  Engine MakeEngine() const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(stream_),
                      static_cast<std::uint32_t>(stream_ >> 32)};
    return Engine(seq);
  }

  friend bool operator==(const RngHandle&, const RngHandle&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
};

}  // namespace dpgauss

#endif  // DPGAUSS_RNG_HPP_
