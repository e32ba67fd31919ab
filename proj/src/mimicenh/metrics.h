// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Objective metrics, implemented from first principles:
//   * SI-SDR: scale-invariant signal-to-distortion ratio in dB.
//   * eSTOI: extended short-time objective intelligibility. Constants are
//     frozen to the standard published procedure: resample to 10 kHz,
//     40 dB energy VAD on the reference, 256/128 frames with 512-point
//     FFT, 15 one-third-octave bands from 150 Hz, 30-frame segments with
//     row+column normalized band envelopes.
//   * frame senone accuracy as a diagnostic.

#ifndef MIMICENH_METRICS_H_
#define MIMICENH_METRICS_H_

#include <optional>
#include <string>
#include <vector>

#include "mimicenh/tensor.h"
#include "mimicenh/wav.h"

namespace mimicenh {

inline constexpr double kSiSdrCapDb = 100.0;

// Both signals mean-centered; estimate projected onto the reference.
// Returns the cap when the residual is negligible (< 1e-12 of target).
double si_sdr(const Waveform& estimate, const Waveform& reference);

// Extended STOI in [-1, 1].
double estoi(const Waveform& estimate, const Waveform& reference);

// Fraction of frames where argmax(logits row) equals the label.
double frame_accuracy(const Tensor& logits, const std::vector<int>& labels);

// Linear-interpolation resampler (used by eSTOI; exposed for tests).
Waveform resample_linear(const Waveform& w, int target_rate);

struct UtteranceMetrics {
  std::string utt_id;
  double si_sdr_db = 0.0;
  double estoi = 0.0;
  std::optional<double> frame_accuracy;
};

struct MetricReport {
  double si_sdr_db = 0.0;
  double estoi = 0.0;
  std::optional<double> frame_accuracy;
  std::vector<UtteranceMetrics> per_utterance;
};

// Aggregate = arithmetic mean of per-utterance values. Empty input is a
// validation error.
MetricReport aggregate_metrics(std::vector<UtteranceMetrics> per_utterance);

}  // namespace mimicenh

#endif  // MIMICENH_METRICS_H_
