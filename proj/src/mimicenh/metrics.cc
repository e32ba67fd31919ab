// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/metrics.h"

#include <algorithm>
#include <cmath>
#include <complex>

#include "mimicenh/common.h"
#include "mimicenh/fft.h"

namespace mimicenh {
namespace {

// eSTOI constants (frozen; see header).
constexpr int kEstoiRate = 10000;
constexpr int kEstoiFrame = 256;
constexpr int kEstoiHop = 128;
constexpr int kEstoiFft = 512;
constexpr int kEstoiBands = 15;
constexpr double kEstoiMinCenterHz = 150.0;
constexpr double kEstoiDynRangeDb = 40.0;
constexpr int kEstoiSegment = 30;  // frames per segment (384 ms)
constexpr double kTinyEps = 2.220446049250313e-16;

// Symmetric Hann without zero endpoints (hanning(N+2) with ends dropped).
std::vector<double> estoi_window() {
  std::vector<double> w(kEstoiFrame);
  for (int n = 0; n < kEstoiFrame; ++n)
    w[static_cast<size_t>(n)] =
        0.5 * (1.0 - std::cos(2.0 * M_PI * (n + 1) / (kEstoiFrame + 1)));
  return w;
}

double frame_norm(const double* x, const std::vector<double>& w) {
  double acc = 0.0;
  for (int n = 0; n < kEstoiFrame; ++n) {
    const double v = w[static_cast<size_t>(n)] * x[n];
    acc += v * v;
  }
  return std::sqrt(acc);
}

// Drops frames whose reference energy is more than 40 dB below the loudest
// frame, then overlap-adds the kept (windowed) frames back to signals.
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const auto w = estoi_window();
  const int64_t len = static_cast<int64_t>(x.size());
  std::vector<int64_t> starts;
  for (int64_t i = 0; i + kEstoiFrame <= len; i += kEstoiHop) starts.push_back(i);
  if (starts.empty()) {
    x.clear();
    y.clear();
    return;
  }
  std::vector<double> energy_db(starts.size());
  double max_db = -1e300;
  for (size_t f = 0; f < starts.size(); ++f) {
    energy_db[f] = 20.0 * std::log10(frame_norm(x.data() + starts[f], w) + kTinyEps);
    max_db = std::max(max_db, energy_db[f]);
  }
  std::vector<int64_t> kept;
  for (size_t f = 0; f < starts.size(); ++f)
    if (energy_db[f] > max_db - kEstoiDynRangeDb) kept.push_back(starts[f]);
  if (kept.empty()) {
    x.clear();
    y.clear();
    return;
  }
  const int64_t out_len = static_cast<int64_t>(kept.size() - 1) * kEstoiHop + kEstoiFrame;
  std::vector<double> xs(static_cast<size_t>(out_len), 0.0);
  std::vector<double> ys(static_cast<size_t>(out_len), 0.0);
  for (size_t f = 0; f < kept.size(); ++f) {
    const int64_t src = kept[f];
    const int64_t dst = static_cast<int64_t>(f) * kEstoiHop;
    for (int n = 0; n < kEstoiFrame; ++n) {
      xs[static_cast<size_t>(dst + n)] += w[static_cast<size_t>(n)] * x[static_cast<size_t>(src + n)];
      ys[static_cast<size_t>(dst + n)] += w[static_cast<size_t>(n)] * y[static_cast<size_t>(src + n)];
    }
  }
  x = std::move(xs);
  y = std::move(ys);
}

// One-third-octave band bin ranges over the 512-point half spectrum:
// for each band, [lo_bin, hi_bin) assigned by nearest bin to each edge.
std::vector<std::pair<int, int>> third_octave_bands() {
  const int n_bins = kEstoiFft / 2 + 1;
  std::vector<std::pair<int, int>> bands;
  auto nearest_bin = [&](double hz) {
    int best = 0;
    double best_d = 1e300;
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * kEstoiRate / kEstoiFft;
      const double d = std::abs(f - hz);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };
  for (int b = 0; b < kEstoiBands; ++b) {
    const double cf = kEstoiMinCenterHz * std::pow(2.0, b / 3.0);
    const int lo = nearest_bin(cf / std::pow(2.0, 1.0 / 6.0));
    const int hi = nearest_bin(cf * std::pow(2.0, 1.0 / 6.0));
    bands.emplace_back(lo, hi);
  }
  return bands;
}

// Band envelopes: [kEstoiBands][n_frames], sqrt of in-band power.
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x) {
  const auto w = estoi_window();
  const auto bands = third_octave_bands();
  const int64_t len = static_cast<int64_t>(x.size());
  std::vector<int64_t> starts;
  for (int64_t i = 0; i + kEstoiFrame <= len; i += kEstoiHop) starts.push_back(i);
  std::vector<std::vector<double>> env(
      kEstoiBands, std::vector<double>(starts.size(), 0.0));
  std::vector<double> buf(kEstoiFrame);
  for (size_t f = 0; f < starts.size(); ++f) {
    for (int n = 0; n < kEstoiFrame; ++n)
      buf[static_cast<size_t>(n)] = w[static_cast<size_t>(n)] * x[static_cast<size_t>(starts[f] + n)];
    auto half = rfft(buf, kEstoiFft);
    for (int b = 0; b < kEstoiBands; ++b) {
      double acc = 0.0;
      for (int k = bands[static_cast<size_t>(b)].first; k < bands[static_cast<size_t>(b)].second; ++k)
        acc += std::norm(half[static_cast<size_t>(k)]);
      env[static_cast<size_t>(b)][f] = std::sqrt(acc);
    }
  }
  return env;
}

// In-place mean/variance normalization of a 15 x 30 segment: rows (band
// trajectories) first, then columns (per-frame spectra).
void row_col_normalize(std::vector<double>& seg, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* p = seg.data() + static_cast<size_t>(r) * cols;
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += p[c];
    mean /= cols;
    double nrm = 0.0;
    for (int c = 0; c < cols; ++c) {
      p[c] -= mean;
      nrm += p[c] * p[c];
    }
    const double inv = 1.0 / std::max(std::sqrt(nrm), kTinyEps);
    for (int c = 0; c < cols; ++c) p[c] *= inv;
  }
  for (int c = 0; c < cols; ++c) {
    double mean = 0.0;
    for (int r = 0; r < rows; ++r) mean += seg[static_cast<size_t>(r) * cols + c];
    mean /= rows;
    double nrm = 0.0;
    for (int r = 0; r < rows; ++r) {
      double& v = seg[static_cast<size_t>(r) * cols + c];
      v -= mean;
      nrm += v * v;
    }
    const double inv = 1.0 / std::max(std::sqrt(nrm), kTinyEps);
    for (int r = 0; r < rows; ++r) seg[static_cast<size_t>(r) * cols + c] *= inv;
  }
}

}  // namespace

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  if (estimate.size() != reference.size())
    throw ValidationError("si_sdr: length mismatch");
  if (estimate.sample_rate != reference.sample_rate)
    throw ValidationError("si_sdr: sample rate mismatch");
  const int64_t n = reference.size();
  if (n == 0) throw ValidationError("si_sdr: empty signals");

  double mean_e = 0.0, mean_r = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    mean_e += estimate.samples[static_cast<size_t>(i)];
    mean_r += reference.samples[static_cast<size_t>(i)];
  }
  mean_e /= static_cast<double>(n);
  mean_r /= static_cast<double>(n);

  double rr = 0.0, er = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double r = reference.samples[static_cast<size_t>(i)] - mean_r;
    const double e = estimate.samples[static_cast<size_t>(i)] - mean_e;
    rr += r * r;
    er += e * r;
  }
  if (rr <= 0.0) throw ValidationError("si_sdr: reference is identically zero");

  const double alpha = er / rr;
  double target_energy = 0.0, residual_energy = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double r = reference.samples[static_cast<size_t>(i)] - mean_r;
    const double e = estimate.samples[static_cast<size_t>(i)] - mean_e;
    const double t = alpha * r;
    target_energy += t * t;
    residual_energy += (e - t) * (e - t);
  }
  if (residual_energy < 1e-12 * target_energy) return kSiSdrCapDb;
  return 10.0 * std::log10(target_energy / residual_energy);
}

Waveform resample_linear(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw ConfigError("resample: target rate must be positive");
  if (w.sample_rate == target_rate) return w;
  const int64_t n_in = w.size();
  if (n_in < 2) throw ValidationError("resample: signal too short");
  const double ratio = static_cast<double>(w.sample_rate) / target_rate;
  const int64_t n_out =
      static_cast<int64_t>(std::floor(static_cast<double>(n_in - 1) / ratio)) + 1;
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<size_t>(n_out));
  for (int64_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const int64_t i0 = static_cast<int64_t>(pos);
    const int64_t i1 = std::min(i0 + 1, n_in - 1);
    const double frac = pos - static_cast<double>(i0);
    out.samples[static_cast<size_t>(i)] =
        (1.0 - frac) * w.samples[static_cast<size_t>(i0)] +
        frac * w.samples[static_cast<size_t>(i1)];
  }
  return out;
}

double estoi(const Waveform& estimate, const Waveform& reference) {
  if (estimate.size() != reference.size())
    throw ValidationError("estoi: length mismatch");
  if (estimate.sample_rate != reference.sample_rate)
    throw ValidationError("estoi: sample rate mismatch");

  Waveform est = resample_linear(estimate, kEstoiRate);
  Waveform ref = resample_linear(reference, kEstoiRate);

  std::vector<double> y = est.samples;  // processed
  std::vector<double> x = ref.samples;  // clean
  remove_silent_frames(x, y);

  auto x_tob = band_envelopes(x);
  auto y_tob = band_envelopes(y);
  const int m = static_cast<int>(x_tob.empty() ? 0 : x_tob[0].size());
  if (m < kEstoiSegment)
    throw ValidationError(
        "estoi: input too short (need at least " + std::to_string(kEstoiSegment) +
        " active analysis frames, got " + std::to_string(m) + ")");

  const int rows = kEstoiBands, cols = kEstoiSegment;
  std::vector<double> seg_x(static_cast<size_t>(rows) * cols);
  std::vector<double> seg_y(static_cast<size_t>(rows) * cols);
  double acc = 0.0;
  const int n_segments = m - kEstoiSegment + 1;
  for (int s = 0; s < n_segments; ++s) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        seg_x[static_cast<size_t>(r) * cols + c] = x_tob[static_cast<size_t>(r)][static_cast<size_t>(s + c)];
        seg_y[static_cast<size_t>(r) * cols + c] = y_tob[static_cast<size_t>(r)][static_cast<size_t>(s + c)];
      }
    row_col_normalize(seg_x, rows, cols);
    row_col_normalize(seg_y, rows, cols);
    double d = 0.0;
    for (size_t i = 0; i < seg_x.size(); ++i) d += seg_x[i] * seg_y[i];
    acc += d / cols;
  }
  const double result = acc / n_segments;
  return std::clamp(result, -1.0, 1.0);
}

double frame_accuracy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) throw ValidationError("frame_accuracy: logits must be [T,S]");
  const int64_t t_count = logits.dim(0), s_count = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != t_count)
    throw ValidationError("frame_accuracy: frame count mismatch (" +
                          std::to_string(t_count) + " vs " +
                          std::to_string(labels.size()) + ")");
  if (t_count == 0) throw ValidationError("frame_accuracy: no frames");
  int64_t hits = 0;
  for (int64_t t = 0; t < t_count; ++t) {
    const double* row = logits.data() + t * s_count;
    int64_t best = 0;
    for (int64_t s = 1; s < s_count; ++s)
      if (row[s] > row[best]) best = s;
    if (best == labels[static_cast<size_t>(t)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(t_count);
}

MetricReport aggregate_metrics(std::vector<UtteranceMetrics> per_utterance) {
  if (per_utterance.empty())
    throw ValidationError("metric report: per-utterance list is empty");
  MetricReport r;
  double acc_count = 0.0, acc_sum = 0.0;
  for (const auto& u : per_utterance) {
    r.si_sdr_db += u.si_sdr_db;
    r.estoi += u.estoi;
    if (u.frame_accuracy) {
      acc_sum += *u.frame_accuracy;
      acc_count += 1.0;
    }
  }
  const double n = static_cast<double>(per_utterance.size());
  r.si_sdr_db /= n;
  r.estoi /= n;
  if (acc_count > 0) r.frame_accuracy = acc_sum / acc_count;
  r.per_utterance = std::move(per_utterance);
  return r;
}

}  // namespace mimicenh
