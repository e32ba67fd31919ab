// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Deterministic, differentiable framing/STFT front end shared by the
// loss engine, the acoustic model features and the tests.
//
// Conventions, used consistently by every consumer:
//   * reflect padding by frame_length/2 on both sides, so frame t is
//     centered at sample t*hop and the frame count for a signal of
//     length L is 1 + floor(L / hop) (for hop dividing the pad span).
//   * bins 0..fft_size/2 are kept (F = fft_size/2 + 1).

#ifndef MIMICENH_STFT_H_
#define MIMICENH_STFT_H_

#include <cstdint>
#include <vector>

#include "mimicenh/autodiff.h"
#include "mimicenh/tensor.h"
#include "mimicenh/wav.h"

namespace mimicenh {

// Gradient-stability epsilons (documented contract constants).
inline constexpr double kMagEps = 1e-12;  // inside magnitude()
inline constexpr double kLogEps = 1e-10;  // inside log_mel()

enum class WindowKind { kHann, kHamming, kRect };

struct StftConfig {
  int frame_length = 512;
  int hop_length = 128;
  WindowKind window = WindowKind::kHann;
  int fft_size = 512;

  void validate() const;
  int bins() const { return fft_size / 2 + 1; }
  bool operator==(const StftConfig&) const = default;
};

struct ComplexSpectrogram {
  Tensor values;  // [T, F, 2] (re, im)
  StftConfig config;
  int64_t n_samples = 0;
  int sample_rate = 16000;

  int64_t frames() const { return values.ndim() ? values.dim(0) : 0; }
  int64_t bins() const { return values.ndim() ? values.dim(1) : 0; }
};

struct MagnitudeSpectrogram {
  Tensor values;  // [T, F], nonnegative
  StftConfig config;
  int64_t n_samples = 0;
  int sample_rate = 16000;

  int64_t frames() const { return values.ndim() ? values.dim(0) : 0; }
  int64_t bins() const { return values.ndim() ? values.dim(1) : 0; }
};

// Periodic window of the given length.
std::vector<double> make_window(WindowKind kind, int length);

// Number of frames produced for a signal of n_samples under cfg.
int64_t stft_frame_count(int64_t n_samples, const StftConfig& cfg);

// True when overlapped window copies sum to a constant (within tol),
// i.e. the config supports exact inversion.
bool satisfies_cola(const StftConfig& cfg, double tol = 1e-8);

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg);
Waveform istft(const ComplexSpectrogram& s);
MagnitudeSpectrogram magnitude(const ComplexSpectrogram& s, double eps = kMagEps);

// Autodiff path: same numerics as the plain functions above.
ad::Var stft_op(const ad::Var& wav, const StftConfig& cfg);            // [L] -> [T,F,2]
ad::Var magnitude_op(const ad::Var& spec, double eps = kMagEps);       // [T,F,2] -> [T,F]

}  // namespace mimicenh

#endif  // MIMICENH_STFT_H_
