// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/mel.h"

#include <cmath>

#include "mimicenh/common.h"

namespace mimicenh {
namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

Tensor build_mel_filterbank(int sample_rate, int fft_size, int n_mels,
                            double fmin_hz, double fmax_hz) {
  const int n_bins = fft_size / 2 + 1;
  if (n_mels < 1) throw ConfigError("mel: n_mels must be >= 1");
  if (n_mels > n_bins)
    throw ConfigError("mel: n_mels exceeds spectrogram bins (" +
                      std::to_string(n_mels) + " > " + std::to_string(n_bins) + ")");
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= sample_rate / 2.0))
    throw ConfigError("mel: require 0 <= fmin < fmax <= sample_rate/2");

  const double mel_min = hz_to_mel(fmin_hz);
  const double mel_max = hz_to_mel(fmax_hz);
  std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[static_cast<size_t>(i)] =
        mel_to_hz(mel_min + (mel_max - mel_min) * i / (n_mels + 1));

  Tensor fb({n_mels, n_bins});
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<size_t>(m)];
    const double mid = edges[static_cast<size_t>(m) + 1];
    const double hi = edges[static_cast<size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double v = 0.0;
      if (f > lo && f < hi)
        v = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      fb.at2(m, k) = v;
    }
    // A triangle narrower than the bin spacing can miss every bin center;
    // fall back to the bin nearest the channel peak.
    double row_sum = 0.0;
    for (int k = 0; k < n_bins; ++k) row_sum += fb.at2(m, k);
    if (row_sum <= 0.0) {
      int k_mid = static_cast<int>(std::lround(mid / bin_hz));
      if (k_mid < 0) k_mid = 0;
      if (k_mid >= n_bins) k_mid = n_bins - 1;
      fb.at2(m, k_mid) = 1.0;
    }
  }
  return fb;
}

Tensor log_mel(const MagnitudeSpectrogram& m, int n_mels, double fmin_hz,
               double fmax_hz) {
  const Tensor fb =
      build_mel_filterbank(m.sample_rate, m.config.fft_size, n_mels, fmin_hz, fmax_hz);
  const int64_t t_count = m.frames();
  const int64_t n_bins = m.bins();
  Tensor out({t_count, n_mels});
  for (int64_t t = 0; t < t_count; ++t)
    for (int64_t c = 0; c < n_mels; ++c) {
      double acc = 0.0;
      for (int64_t k = 0; k < n_bins; ++k) {
        const double mag = m.values.at2(t, k);
        acc += fb.at2(c, k) * mag * mag;
      }
      out.at2(t, c) = std::log(acc + kLogEps);
    }
  return out;
}

}  // namespace mimicenh
