// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIMICENH_RNG_H_
#define MIMICENH_RNG_H_

#include <cstdint>
#include <string_view>
#include <vector>

namespace mimicenh {

// Deterministic random stream. Uniform/normal draws are generated with
// fixed algorithms (no std::*_distribution) so sequences are identical
// across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int64_t uniform_int(int64_t n);        // [0, n)
  double normal();                       // standard normal, Box-Muller

  void fill_normal(double* out, int64_t n, double stddev = 1.0);
  void fill_uniform(double* out, int64_t n, double lo, double hi);

  // Fisher-Yates shuffle of an index permutation.
  std::vector<int> permutation(int n);

 private:
  uint64_t state_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

// Mixes a base seed with arbitrary keys into a stream seed, so every
// (utterance, epoch, ...) site gets an independent reproducible stream.
uint64_t mix_seed(uint64_t seed, uint64_t key);
uint64_t mix_seed(uint64_t seed, std::string_view key);

}  // namespace mimicenh

#endif  // MIMICENH_RNG_H_
