// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/rng.h"

#include <cmath>

namespace mimicenh {
namespace {

// splitmix64: full-period 64-bit mixer, used both as the generator core
// and for key derivation.
uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed) : state_(seed) {
  // Warm up so nearby seeds decorrelate immediately.
  uint64_t s = state_;
  splitmix64(s);
  state_ = s;
}

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int64_t Rng::uniform_int(int64_t n) {
  return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller on two uniforms; u1 kept away from 0.
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 1e-300);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

void Rng::fill_normal(double* out, int64_t n, double stddev) {
  for (int64_t i = 0; i < n; ++i) out[i] = stddev * normal();
}

void Rng::fill_uniform(double* out, int64_t n, double lo, double hi) {
  for (int64_t i = 0; i < n; ++i) out[i] = uniform(lo, hi);
}

std::vector<int> Rng::permutation(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(uniform_int(i + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

uint64_t mix_seed(uint64_t seed, uint64_t key) {
  uint64_t x = seed ^ (0x9e3779b97f4a7c15ull + (key << 1));
  splitmix64(x);
  uint64_t y = x ^ key;
  return splitmix64(y);
}

uint64_t mix_seed(uint64_t seed, std::string_view key) {
  // FNV-1a over the string, then mixed with the seed.
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : key) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return mix_seed(seed, h);
}

}  // namespace mimicenh
