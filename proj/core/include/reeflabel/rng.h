// Copyright 2026 The Reeflabel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace reeflabel {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent child seeds.
inline std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, stable across platforms (std::hash is not).
inline std::uint64_t StableHash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed-splitting rule: child = Mix64(parent ^ Mix64(tag)). Every per-image,
// per-loop or per-worker stream is derived this way from the run seed.
inline std::uint64_t DeriveSeed(std::uint64_t parent, std::uint64_t tag) {
  return Mix64(parent ^ Mix64(tag));
}

inline std::uint64_t DeriveSeed(std::uint64_t parent, std::string_view tag) {
  return DeriveSeed(parent, StableHash(tag));
}

inline double Uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Beta(a, b) via two gamma draws.
inline double SampleBeta(Rng& rng, double a, double b) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x / (x + y);
}

}  // namespace reeflabel
