// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/stft.h"

#include <cmath>
#include <complex>
#include <memory>

#include "mimicenh/common.h"
#include "mimicenh/fft.h"

namespace mimicenh {
namespace {

// Reflect-pad index map: padded index -> source index. Mirrors about the
// edges without repeating them (x[p], ..., x[1] | x | x[L-2], ..., ).
std::vector<int64_t> reflect_map(int64_t n, int64_t pad) {
  std::vector<int64_t> map(static_cast<size_t>(n + 2 * pad));
  for (int64_t i = 0; i < n + 2 * pad; ++i) {
    int64_t j = i - pad;
    if (j < 0) j = -j;
    if (j >= n) j = 2 * (n - 1) - j;
    map[static_cast<size_t>(i)] = j;
  }
  return map;
}

struct StftPlan {
  StftConfig cfg;
  int64_t n_samples = 0;
  int64_t pad = 0;
  int64_t frames = 0;
  std::vector<double> window;
  std::vector<int64_t> map;  // reflect pad map
};

StftPlan make_plan(int64_t n_samples, const StftConfig& cfg) {
  cfg.validate();
  if (n_samples < cfg.frame_length)
    throw ValidationError("stft: signal shorter than one frame (" +
                          std::to_string(n_samples) + " < " +
                          std::to_string(cfg.frame_length) + ")");
  StftPlan p;
  p.cfg = cfg;
  p.n_samples = n_samples;
  p.pad = cfg.frame_length / 2;
  const int64_t padded = n_samples + 2 * p.pad;
  p.frames = 1 + (padded - cfg.frame_length) / cfg.hop_length;
  p.window = make_window(cfg.window, cfg.frame_length);
  p.map = reflect_map(n_samples, p.pad);
  return p;
}

Tensor stft_values(const double* x, const StftPlan& p) {
  const int64_t f_bins = p.cfg.bins();
  Tensor out({p.frames, f_bins, 2});
  const int64_t frame = p.cfg.frame_length;
  std::vector<double> buf(static_cast<size_t>(frame));
  for (int64_t t = 0; t < p.frames; ++t) {
    const int64_t base = t * p.cfg.hop_length;
    for (int64_t n = 0; n < frame; ++n)
      buf[static_cast<size_t>(n)] =
          p.window[static_cast<size_t>(n)] * x[p.map[static_cast<size_t>(base + n)]];
    auto half = rfft(buf, p.cfg.fft_size);
    for (int64_t k = 0; k < f_bins; ++k) {
      out.at3(t, k, 0) = half[static_cast<size_t>(k)].real();
      out.at3(t, k, 1) = half[static_cast<size_t>(k)].imag();
    }
  }
  return out;
}

// Adjoint of stft_values: scatter spectrogram cotangents back to samples.
void stft_adjoint(const Tensor& gspec, const StftPlan& p, double* gx) {
  const int64_t f_bins = p.cfg.bins();
  const int64_t nfft = p.cfg.fft_size;
  const int64_t frame = p.cfg.frame_length;
  std::vector<std::complex<double>> buf(static_cast<size_t>(nfft));
  for (int64_t t = 0; t < p.frames; ++t) {
    for (auto& v : buf) v = {0.0, 0.0};
    for (int64_t k = 0; k < f_bins; ++k)
      buf[static_cast<size_t>(k)] = {gspec.at3(t, k, 0), gspec.at3(t, k, 1)};
    // unnormalized Sum_k G[k] e^{+2pi i k n / N}; real part is d/dx of the
    // half-spectrum map (no conjugate extension, matching the forward).
    fft_inplace(buf, true);
    const int64_t base = t * p.cfg.hop_length;
    for (int64_t n = 0; n < frame; ++n) {
      const double g = p.window[static_cast<size_t>(n)] * buf[static_cast<size_t>(n)].real();
      gx[p.map[static_cast<size_t>(base + n)]] += g;
    }
  }
}

}  // namespace

void StftConfig::validate() const {
  if (frame_length < 2) throw ConfigError("stft: frame_length must be >= 2");
  if (hop_length < 1) throw ConfigError("stft: hop_length must be >= 1");
  if (hop_length > frame_length)
    throw ConfigError("stft: hop_length must not exceed frame_length");
  if (fft_size < frame_length)
    throw ConfigError("stft: fft_size must be >= frame_length");
  if (!is_power_of_two(fft_size))
    throw ConfigError("stft: fft_size must be a power of two");
}

std::vector<double> make_window(WindowKind kind, int length) {
  std::vector<double> w(static_cast<size_t>(length));
  switch (kind) {
    case WindowKind::kHann:
      for (int n = 0; n < length; ++n)
        w[static_cast<size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / length);
      break;
    case WindowKind::kHamming:
      for (int n = 0; n < length; ++n)
        w[static_cast<size_t>(n)] = 0.54 - 0.46 * std::cos(2.0 * M_PI * n / length);
      break;
    case WindowKind::kRect:
      for (auto& v : w) v = 1.0;
      break;
  }
  return w;
}

int64_t stft_frame_count(int64_t n_samples, const StftConfig& cfg) {
  const int64_t pad = cfg.frame_length / 2;
  const int64_t padded = n_samples + 2 * pad;
  return 1 + (padded - cfg.frame_length) / cfg.hop_length;
}

bool satisfies_cola(const StftConfig& cfg, double tol) {
  const auto w = make_window(cfg.window, cfg.frame_length);
  // Steady-state overlap-add sum over one hop period.
  std::vector<double> s(static_cast<size_t>(cfg.hop_length), 0.0);
  for (int n = 0; n < cfg.hop_length; ++n)
    for (int j = n; j < cfg.frame_length; j += cfg.hop_length)
      s[static_cast<size_t>(n)] += w[static_cast<size_t>(j)];
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  if (mean <= 0.0) return false;
  for (double v : s)
    if (std::abs(v - mean) > tol * mean) return false;
  return true;
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  for (double v : w.samples)
    if (!std::isfinite(v)) throw ValidationError("stft: non-finite sample");
  const StftPlan p = make_plan(w.size(), cfg);
  ComplexSpectrogram s;
  s.values = stft_values(w.samples.data(), p);
  s.config = cfg;
  s.n_samples = w.size();
  s.sample_rate = w.sample_rate;
  return s;
}

Waveform istft(const ComplexSpectrogram& s) {
  s.config.validate();
  if (!satisfies_cola(s.config))
    throw ConfigError("istft: window/hop pair does not satisfy COLA");
  const int64_t frame = s.config.frame_length;
  const int64_t hop = s.config.hop_length;
  const int64_t nfft = s.config.fft_size;
  const int64_t f_bins = s.config.bins();
  if (s.bins() != f_bins) throw ValidationError("istft: bin count mismatch");
  const int64_t pad = frame / 2;
  const int64_t padded = s.n_samples + 2 * pad;
  const auto win = make_window(s.config.window, static_cast<int>(frame));

  std::vector<double> acc(static_cast<size_t>(padded), 0.0);
  std::vector<double> wsum(static_cast<size_t>(padded), 0.0);
  std::vector<std::complex<double>> half(static_cast<size_t>(f_bins));
  for (int64_t t = 0; t < s.frames(); ++t) {
    for (int64_t k = 0; k < f_bins; ++k)
      half[static_cast<size_t>(k)] = {s.values.at3(t, k, 0), s.values.at3(t, k, 1)};
    auto frame_sig = irfft(half, static_cast<int>(nfft));
    const int64_t base = t * hop;
    for (int64_t n = 0; n < frame && base + n < padded; ++n) {
      acc[static_cast<size_t>(base + n)] += win[static_cast<size_t>(n)] * frame_sig[static_cast<size_t>(n)];
      wsum[static_cast<size_t>(base + n)] += win[static_cast<size_t>(n)] * win[static_cast<size_t>(n)];
    }
  }
  Waveform out;
  out.sample_rate = s.sample_rate;
  out.samples.resize(static_cast<size_t>(s.n_samples));
  for (int64_t i = 0; i < s.n_samples; ++i) {
    const double ws = wsum[static_cast<size_t>(i + pad)];
    out.samples[static_cast<size_t>(i)] =
        ws > 1e-12 ? acc[static_cast<size_t>(i + pad)] / ws : 0.0;
  }
  return out;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& s, double eps) {
  MagnitudeSpectrogram m;
  m.config = s.config;
  m.n_samples = s.n_samples;
  m.sample_rate = s.sample_rate;
  m.values = Tensor({s.frames(), s.bins()});
  for (int64_t t = 0; t < s.frames(); ++t)
    for (int64_t k = 0; k < s.bins(); ++k) {
      const double re = s.values.at3(t, k, 0);
      const double im = s.values.at3(t, k, 1);
      m.values.at2(t, k) = std::sqrt(re * re + im * im + eps);
    }
  return m;
}

ad::Var stft_op(const ad::Var& wav, const StftConfig& cfg) {
  if (wav->value.ndim() != 1) throw ValidationError("stft_op: expects 1-D input");
  if (!wav->value.all_finite()) throw ValidationError("stft_op: non-finite sample");
  auto plan = std::make_shared<StftPlan>(make_plan(wav->value.numel(), cfg));
  auto node = std::make_shared<ad::Node>();
  node->value = stft_values(wav->value.data(), *plan);
  node->requires_grad = wav->requires_grad;
  if (node->requires_grad) {
    node->parents = {wav};
    node->backward_fn = [wav, plan](ad::Node& n) {
      wav->ensure_grad();
      stft_adjoint(n.grad, *plan, wav->grad.data());
    };
  }
  return node;
}

ad::Var magnitude_op(const ad::Var& spec, double eps) {
  const Tensor& v = spec->value;
  if (v.ndim() != 3 || v.dim(2) != 2)
    throw ValidationError("magnitude_op: expects [T,F,2]");
  Tensor m({v.dim(0), v.dim(1)});
  for (int64_t i = 0; i < m.numel(); ++i) {
    const double re = v[2 * i], im = v[2 * i + 1];
    m[i] = std::sqrt(re * re + im * im + eps);
  }
  auto node = std::make_shared<ad::Node>();
  node->value = std::move(m);
  node->requires_grad = spec->requires_grad;
  if (node->requires_grad) {
    node->parents = {spec};
    node->backward_fn = [spec](ad::Node& n) {
      spec->ensure_grad();
      const int64_t count = n.value.numel();
      for (int64_t i = 0; i < count; ++i) {
        const double g = n.grad[i] / n.value[i];
        spec->grad[2 * i] += g * spec->value[2 * i];
        spec->grad[2 * i + 1] += g * spec->value[2 * i + 1];
      }
    };
  }
  return node;
}

}  // namespace mimicenh
