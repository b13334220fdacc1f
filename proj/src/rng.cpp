// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/core.hpp>

namespace planet {

// splitmix64 finalizer
std::uint64_t Rng::mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::child(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
  std::uint64_t h = mix(seed_ ^ 0x5851f42d4c957f2dULL);
  h = mix(h ^ a);
  h = mix(h ^ (b + 0x632be59bd9b4e019ULL));
  h = mix(h ^ (c + 0x85ebca6b2f1c9d47ULL));
  return Rng(h);
}

}  // namespace planet
