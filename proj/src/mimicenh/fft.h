// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIMICENH_FFT_H_
#define MIMICENH_FFT_H_

#include <complex>
#include <vector>

namespace mimicenh {

bool is_power_of_two(int n);

// In-place iterative radix-2 FFT. n must be a power of two.
// inverse=true applies the conjugate transform WITHOUT the 1/n factor.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

// Real-input forward DFT, returning bins 0..n/2 (inclusive).
std::vector<std::complex<double>> rfft(const std::vector<double>& x, int n);

// Inverse of rfft: reconstructs the length-n real signal from the
// half-spectrum (bins 0..n/2), assuming conjugate symmetry.
std::vector<double> irfft(const std::vector<std::complex<double>>& half, int n);

}  // namespace mimicenh

#endif  // MIMICENH_FFT_H_
