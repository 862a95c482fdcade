// Copyright 2026 The CMKT-SE Authors
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

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace cmkt {

/// SplitMix64 finalizer.
inline std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Child seed for a named stream, e.g. DeriveSeed(seed, {step, kStream}).
inline std::uint64_t DeriveSeed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = Mix64(seed);
  for (auto p : parts) h = Mix64(h ^ Mix64(p));
  return h;
}

/// Uniform in [0, 1) from the top 53 bits; identical on every standard library.
template <typename Engine>
double Uniform01(Engine &rng) {
  return static_cast<double>(static_cast<std::uint64_t>(rng()) >> 11) * 0x1.0p-53;
}

template <typename Engine>
double UniformIn(Engine &rng, double lo, double hi) {
  return lo + (hi - lo) * Uniform01(rng);
}

/// Standard normal draw (Box-Muller), also library-independent.
template <typename Engine>
double Gaussian(Engine &rng) {
  const double u1 = 1.0 - Uniform01(rng);  // (0, 1]
  const double u2 = Uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace cmkt
