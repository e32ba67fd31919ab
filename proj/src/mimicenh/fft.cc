// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/fft.h"

#include <cmath>

#include "mimicenh/common.h"

namespace mimicenh {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const int n = static_cast<int>(a.size());
  if (!is_power_of_two(n)) throw ConfigError("fft size must be a power of two");

  // Bit-reversal permutation.
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (int len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * M_PI / len * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<std::complex<double>> rfft(const std::vector<double>& x, int n) {
  std::vector<std::complex<double>> buf(static_cast<size_t>(n));
  const size_t copy = std::min(x.size(), static_cast<size_t>(n));
  for (size_t i = 0; i < copy; ++i) buf[i] = x[i];
  fft_inplace(buf, false);
  buf.resize(static_cast<size_t>(n / 2 + 1));
  return buf;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& half, int n) {
  if (static_cast<int>(half.size()) != n / 2 + 1)
    throw ValidationError("irfft: expected n/2+1 bins");
  std::vector<std::complex<double>> buf(static_cast<size_t>(n));
  for (int k = 0; k <= n / 2; ++k) buf[static_cast<size_t>(k)] = half[static_cast<size_t>(k)];
  for (int k = n / 2 + 1; k < n; ++k)
    buf[static_cast<size_t>(k)] = std::conj(half[static_cast<size_t>(n - k)]);
  fft_inplace(buf, true);
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = buf[static_cast<size_t>(i)].real() / n;
  return out;
}

}  // namespace mimicenh
