// Copyright 2026-present the appmorph project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace appmorph {

/// SplitMix64 finalizer. Used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t x);

/// Stable 64-bit hash of a string (FNV-1a followed by mix64), salted by seed.
/// Unlike std::hash this is identical on every platform and run.
std::uint64_t hash_string(std::string_view s, std::uint64_t seed = 0);

/// Combine two 64-bit values into one hash.
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

/// Seeded generator with platform-independent derived distributions.
///
/// std::uniform_int_distribution and std::normal_distribution are
/// implementation-defined, so reruns on another standard library could
/// differ. The engine (mt19937_64) is fully specified; the distributions
/// below are written out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t uniform(std::size_t n);

  /// Uniform double in [0, 1).
  double uniform01();

  /// Standard normal deviate (Box-Muller, no cached second value).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace appmorph
