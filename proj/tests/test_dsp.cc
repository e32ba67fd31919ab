// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// STFT/iSTFT/magnitude/log-mel against independent oracles: naive O(N^2)
// DFT, naive overlap-add inversion, elementwise magnitude and dense
// filterbank multiplies, plus linearity/round-trip/Parseval/gradient
// properties.

#include <doctest.h>

#include <cmath>
#include <complex>

#include "mimicenh/common.h"
#include "mimicenh/mel.h"
#include "mimicenh/rng.h"
#include "mimicenh/stft.h"

using namespace mimicenh;

namespace {

// Reflect padding replicated independently of the implementation.
std::vector<double> oracle_reflect_pad(const std::vector<double>& x, int64_t pad) {
  const int64_t n = static_cast<int64_t>(x.size());
  std::vector<double> out(static_cast<size_t>(n + 2 * pad));
  for (int64_t i = 0; i < n + 2 * pad; ++i) {
    int64_t j = i - pad;
    if (j < 0) j = -j;
    if (j >= n) j = 2 * (n - 1) - j;
    out[static_cast<size_t>(i)] = x[static_cast<size_t>(j)];
  }
  return out;
}

// Naive O(N^2) STFT oracle following the documented framing convention.
std::vector<std::vector<std::complex<double>>> oracle_stft(
    const std::vector<double>& x, const StftConfig& cfg) {
  const auto padded = oracle_reflect_pad(x, cfg.frame_length / 2);
  const auto win = make_window(cfg.window, cfg.frame_length);
  const int64_t frames =
      1 + (static_cast<int64_t>(padded.size()) - cfg.frame_length) / cfg.hop_length;
  std::vector<std::vector<std::complex<double>>> out;
  for (int64_t t = 0; t < frames; ++t) {
    std::vector<std::complex<double>> row(static_cast<size_t>(cfg.fft_size / 2 + 1));
    for (int k = 0; k <= cfg.fft_size / 2; ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (int n = 0; n < cfg.frame_length; ++n) {
        const double v = win[static_cast<size_t>(n)] *
                         padded[static_cast<size_t>(t * cfg.hop_length + n)];
        const double ang = -2.0 * M_PI * k * n / cfg.fft_size;
        acc += v * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      row[static_cast<size_t>(k)] = acc;
    }
    out.push_back(std::move(row));
  }
  return out;
}

// Naive overlap-add inversion oracle (O(N^2) inverse DFT per frame).
std::vector<double> oracle_istft(const ComplexSpectrogram& s) {
  const int64_t frame = s.config.frame_length;
  const int64_t hop = s.config.hop_length;
  const int64_t nfft = s.config.fft_size;
  const int64_t pad = frame / 2;
  const int64_t padded = s.n_samples + 2 * pad;
  const auto win = make_window(s.config.window, static_cast<int>(frame));

  std::vector<double> acc(static_cast<size_t>(padded), 0.0);
  std::vector<double> wsum(static_cast<size_t>(padded), 0.0);
  for (int64_t t = 0; t < s.frames(); ++t) {
    // full conjugate-symmetric spectrum, then naive inverse DFT
    std::vector<std::complex<double>> full(static_cast<size_t>(nfft));
    for (int64_t k = 0; k <= nfft / 2; ++k)
      full[static_cast<size_t>(k)] = {s.values.at3(t, k, 0), s.values.at3(t, k, 1)};
    for (int64_t k = nfft / 2 + 1; k < nfft; ++k)
      full[static_cast<size_t>(k)] = std::conj(full[static_cast<size_t>(nfft - k)]);
    for (int64_t n = 0; n < frame && t * hop + n < padded; ++n) {
      std::complex<double> v(0.0, 0.0);
      for (int64_t k = 0; k < nfft; ++k) {
        const double ang = 2.0 * M_PI * static_cast<double>(k * n) / static_cast<double>(nfft);
        v += full[static_cast<size_t>(k)] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      const double sample = v.real() / static_cast<double>(nfft);
      acc[static_cast<size_t>(t * hop + n)] += win[static_cast<size_t>(n)] * sample;
      wsum[static_cast<size_t>(t * hop + n)] +=
          win[static_cast<size_t>(n)] * win[static_cast<size_t>(n)];
    }
  }
  std::vector<double> out(static_cast<size_t>(s.n_samples));
  for (int64_t i = 0; i < s.n_samples; ++i) {
    const double ws = wsum[static_cast<size_t>(i + pad)];
    out[static_cast<size_t>(i)] = ws > 1e-12 ? acc[static_cast<size_t>(i + pad)] / ws : 0.0;
  }
  return out;
}

Waveform random_wave(int64_t n, uint64_t seed, double stddev = 0.5) {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(static_cast<size_t>(n));
  Rng rng(seed);
  rng.fill_normal(w.samples.data(), n, stddev);
  return w;
}

}  // namespace

TEST_CASE("stft: all-zero input gives all-zero spectrogram") {
  Waveform w;
  w.samples.assign(2048, 0.0);
  StftConfig cfg;
  auto s = stft(w, cfg);
  CHECK(s.frames() == stft_frame_count(2048, cfg));
  for (int64_t i = 0; i < s.values.numel(); ++i) CHECK(s.values[i] == 0.0);
}

TEST_CASE("stft: unit impulse, rect window -> unit magnitude in first frame") {
  StftConfig cfg;
  cfg.frame_length = 256;
  cfg.hop_length = 128;
  cfg.fft_size = 256;
  cfg.window = WindowKind::kRect;
  Waveform w;
  w.samples.assign(1024, 0.0);
  w.samples[0] = 1.0;
  auto s = stft(w, cfg);
  for (int64_t k = 0; k < s.bins(); ++k) {
    const double mag = std::hypot(s.values.at3(0, k, 0), s.values.at3(0, k, 1));
    CHECK(mag == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("stft: bin-aligned sine concentrates energy; matches naive DFT oracle") {
  StftConfig cfg;
  cfg.frame_length = 256;
  cfg.hop_length = 128;
  cfg.fft_size = 256;
  cfg.window = WindowKind::kRect;
  const int k0 = 8;
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(2048);
  for (size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = std::sin(2.0 * M_PI * k0 * static_cast<double>(i) / cfg.fft_size);

  auto s = stft(w, cfg);
  auto oracle = oracle_stft(w.samples, cfg);
  REQUIRE(s.frames() == static_cast<int64_t>(oracle.size()));

  double max_dev = 0.0;
  for (int64_t t = 0; t < s.frames(); ++t)
    for (int64_t k = 0; k < s.bins(); ++k) {
      const std::complex<double> got(s.values.at3(t, k, 0), s.values.at3(t, k, 1));
      max_dev = std::max(max_dev, std::abs(got - oracle[static_cast<size_t>(t)][static_cast<size_t>(k)]));
    }
  CHECK(max_dev <= 1e-6);

  // Interior frames (fully inside the unpadded signal) peak exactly at k0.
  const int64_t pad = cfg.frame_length / 2;
  for (int64_t t = 0; t < s.frames(); ++t) {
    const int64_t start = t * cfg.hop_length;
    if (start < pad || start + cfg.frame_length > pad + w.size()) continue;
    int64_t argmax = 0;
    double best = -1.0;
    for (int64_t k = 0; k < s.bins(); ++k) {
      const double mag = std::hypot(s.values.at3(t, k, 0), s.values.at3(t, k, 1));
      if (mag > best) {
        best = mag;
        argmax = k;
      }
    }
    CHECK(argmax == k0);
  }
}

TEST_CASE("stft: error paths") {
  StftConfig cfg;
  Waveform small;
  small.samples.assign(100, 0.0);  // < frame_length
  CHECK_THROWS_AS(stft(small, cfg), ValidationError);

  Waveform bad;
  bad.samples.assign(1024, 0.0);
  bad.samples[5] = std::nan("");
  CHECK_THROWS_AS(stft(bad, cfg), ValidationError);

  StftConfig bad_cfg;
  bad_cfg.hop_length = 1024;  // > frame_length
  Waveform ok = random_wave(4096, 1);
  CHECK_THROWS_AS(stft(ok, bad_cfg), ConfigError);
}

TEST_CASE("istft: COLA round trip on white noise (hann 256/128)") {
  StftConfig cfg;
  cfg.frame_length = 256;
  cfg.hop_length = 128;
  cfg.fft_size = 256;
  Waveform w = random_wave(4096, 7);
  auto rec = istft(stft(w, cfg));
  REQUIRE(rec.size() == w.size());

  // interior region: one frame length in from each edge
  double num = 0.0, den = 0.0;
  for (int64_t i = cfg.frame_length; i < w.size() - cfg.frame_length; ++i) {
    const double d = rec.samples[static_cast<size_t>(i)] - w.samples[static_cast<size_t>(i)];
    num += d * d;
    den += w.samples[static_cast<size_t>(i)] * w.samples[static_cast<size_t>(i)];
  }
  CHECK(std::sqrt(num / den) <= 1e-6);
}

TEST_CASE("istft: zero spectrogram -> zero waveform; non-COLA config rejected") {
  StftConfig cfg;
  cfg.frame_length = 256;
  cfg.hop_length = 128;
  cfg.fft_size = 256;
  Waveform w = random_wave(2048, 9);
  auto s = stft(w, cfg);
  s.values.fill(0.0);
  auto rec = istft(s);
  for (double v : rec.samples) CHECK(v == 0.0);

  // rect window with hop not dividing the frame violates COLA
  StftConfig bad;
  bad.frame_length = 256;
  bad.hop_length = 96;
  bad.fft_size = 256;
  bad.window = WindowKind::kRect;
  auto s2 = stft(w, bad);
  CHECK_THROWS_AS(istft(s2), ConfigError);
  CHECK_FALSE(satisfies_cola(bad));
  CHECK(satisfies_cola(cfg));
}

TEST_CASE("istft: random spectrogram matches naive overlap-add oracle") {
  StftConfig cfg;
  cfg.frame_length = 128;
  cfg.hop_length = 64;
  cfg.fft_size = 128;
  Waveform w = random_wave(1024, 13);
  auto s = stft(w, cfg);
  Rng rng(21);
  rng.fill_normal(s.values.data(), s.values.numel(), 1.0);

  auto got = istft(s);
  auto want = oracle_istft(s);
  double max_dev = 0.0;
  for (int64_t i = 0; i < got.size(); ++i)
    max_dev = std::max(max_dev,
                       std::abs(got.samples[static_cast<size_t>(i)] - want[static_cast<size_t>(i)]));
  CHECK(max_dev <= 1e-6);
}

TEST_CASE("magnitude: eps floor, 3-4-5, elementwise oracle") {
  StftConfig cfg;
  cfg.frame_length = 128;
  cfg.hop_length = 64;
  cfg.fft_size = 128;
  Waveform w = random_wave(512, 17);
  auto s = stft(w, cfg);

  SUBCASE("zero spectrogram -> sqrt(eps)") {
    s.values.fill(0.0);
    auto m = magnitude(s);
    for (int64_t i = 0; i < m.values.numel(); ++i)
      CHECK(m.values[i] == doctest::Approx(std::sqrt(kMagEps)).epsilon(1e-12));
  }
  SUBCASE("3+4i -> 5") {
    s.values.at3(0, 0, 0) = 3.0;
    s.values.at3(0, 0, 1) = 4.0;
    auto m = magnitude(s);
    CHECK(m.values.at2(0, 0) == doctest::Approx(5.0).epsilon(1e-9));
  }
  SUBCASE("random spectrogram matches |.| oracle within 1e-6") {
    Rng rng(23);
    rng.fill_normal(s.values.data(), s.values.numel(), 2.0);
    auto m = magnitude(s, 1e-12);
    for (int64_t t = 0; t < s.frames(); ++t)
      for (int64_t k = 0; k < s.bins(); ++k) {
        const double want = std::hypot(s.values.at3(t, k, 0), s.values.at3(t, k, 1));
        CHECK(std::abs(m.values.at2(t, k) - want) <= 1e-6);
      }
  }
}

TEST_CASE("log_mel: zero input, nonzero rows, single-bin impulse vs dense oracle") {
  StftConfig cfg;
  cfg.frame_length = 256;
  cfg.hop_length = 128;
  cfg.fft_size = 256;

  MagnitudeSpectrogram m;
  m.config = cfg;
  m.sample_rate = 16000;
  m.n_samples = 1024;
  m.values = Tensor({9, cfg.bins()});

  SUBCASE("zero power -> constant log(eps)") {
    auto lm = log_mel(m, 20, 50.0, 8000.0);
    for (int64_t i = 0; i < lm.numel(); ++i)
      CHECK(lm[i] == doctest::Approx(std::log(kLogEps)).epsilon(1e-12));
  }

  SUBCASE("filterbank rows all nonzero") {
    for (int n_mels : {8, 20, 40}) {
      Tensor fb = build_mel_filterbank(16000, 256, n_mels, 50.0, 8000.0);
      for (int64_t r = 0; r < fb.dim(0); ++r) {
        double row_sum = 0.0;
        for (int64_t k = 0; k < fb.dim(1); ++k) {
          CHECK(fb.at2(r, k) >= 0.0);
          row_sum += fb.at2(r, k);
        }
        CHECK(row_sum > 0.0);
      }
    }
  }

  SUBCASE("single-bin impulse spectrum -> energy in covering channels only") {
    const int n_mels = 20;
    const int64_t k_hit = 40;
    m.values.at2(3, k_hit) = 2.5;
    Tensor fb = build_mel_filterbank(16000, 256, n_mels, 50.0, 8000.0);
    auto lm = log_mel(m, n_mels, 50.0, 8000.0);

    int covering = 0;
    for (int c = 0; c < n_mels; ++c) {
      // dense oracle: explicit multiply of filterbank row with power row
      double acc = 0.0;
      for (int64_t k = 0; k < fb.dim(1); ++k)
        acc += fb.at2(c, k) * m.values.at2(3, k) * m.values.at2(3, k);
      CHECK(lm.at2(3, c) == doctest::Approx(std::log(acc + kLogEps)).epsilon(1e-12));
      if (fb.at2(c, k_hit) > 0.0) {
        ++covering;
        CHECK(lm.at2(3, c) > std::log(kLogEps) + 1.0);
      } else {
        CHECK(lm.at2(3, c) == doctest::Approx(std::log(kLogEps)).epsilon(1e-12));
      }
    }
    CHECK(covering >= 1);
    CHECK(covering <= 2);
  }

  SUBCASE("n_mels exceeding bins rejected") {
    CHECK_THROWS_AS(log_mel(m, 500, 50.0, 8000.0), ConfigError);
    CHECK_THROWS_AS(build_mel_filterbank(16000, 256, 10, 6000.0, 5000.0), ConfigError);
  }
}

TEST_CASE("property: stft linearity") {
  StftConfig cfg;
  cfg.frame_length = 256;
  cfg.hop_length = 128;
  cfg.fft_size = 256;
  Waveform x = random_wave(2048, 31);
  Waveform y = random_wave(2048, 37);
  const double a = 0.73, b = -1.21;
  Waveform combo;
  combo.sample_rate = 16000;
  combo.samples.resize(2048);
  for (size_t i = 0; i < combo.samples.size(); ++i)
    combo.samples[i] = a * x.samples[i] + b * y.samples[i];

  auto sx = stft(x, cfg), sy = stft(y, cfg), sc = stft(combo, cfg);
  for (int64_t i = 0; i < sc.values.numel(); ++i)
    CHECK(std::abs(sc.values[i] - (a * sx.values[i] + b * sy.values[i])) <= 1e-8);
}

TEST_CASE("property: Parseval for rect window without overlap") {
  StftConfig cfg;
  cfg.frame_length = 256;
  cfg.hop_length = 256;
  cfg.fft_size = 256;
  cfg.window = WindowKind::kRect;
  Waveform w = random_wave(2048, 41);
  auto s = stft(w, cfg);
  const auto padded = oracle_reflect_pad(w.samples, cfg.frame_length / 2);

  for (int64_t t = 0; t < s.frames(); ++t) {
    double spec_energy = 0.0;
    for (int64_t k = 0; k < s.bins(); ++k) {
      const double p = s.values.at3(t, k, 0) * s.values.at3(t, k, 0) +
                       s.values.at3(t, k, 1) * s.values.at3(t, k, 1);
      const bool interior = k != 0 && k != cfg.fft_size / 2;
      spec_energy += interior ? 2.0 * p : p;  // conjugate-symmetric half
    }
    double time_energy = 0.0;
    for (int n = 0; n < cfg.frame_length; ++n) {
      const double v = padded[static_cast<size_t>(t * cfg.hop_length + n)];
      time_energy += v * v;
    }
    CHECK(spec_energy ==
          doctest::Approx(cfg.fft_size * time_energy).epsilon(1e-6));
  }
}

TEST_CASE("property: stft and magnitude gradients match finite differences") {
  StftConfig cfg;
  cfg.frame_length = 256;
  cfg.hop_length = 128;
  cfg.fft_size = 256;
  const int64_t n = 512;
  Waveform w = random_wave(n, 43);
  Rng rng(47);

  SUBCASE("stft") {
    auto s_probe = stft(w, cfg);
    Tensor c(s_probe.values.shape());
    rng.fill_normal(c.data(), c.numel(), 1.0);

    ad::Var leaf = ad::make_leaf(Tensor::from_vector(w.samples), true);
    ad::Var out = stft_op(leaf, cfg);
    ad::Var loss = ad::scale(ad::mean_all(ad::mul(out, ad::constant(c))),
                             static_cast<double>(c.numel()));
    ad::backward(loss);

    // directional derivative along a random direction
    std::vector<double> dir(static_cast<size_t>(n));
    rng.fill_normal(dir.data(), n, 1.0);
    double analytic = 0.0;
    for (int64_t i = 0; i < n; ++i) analytic += leaf->grad[i] * dir[static_cast<size_t>(i)];

    const double h = 1e-5;
    Waveform wp = w, wm = w;
    for (int64_t i = 0; i < n; ++i) {
      wp.samples[static_cast<size_t>(i)] += h * dir[static_cast<size_t>(i)];
      wm.samples[static_cast<size_t>(i)] -= h * dir[static_cast<size_t>(i)];
    }
    auto eval = [&](const Waveform& sig) {
      auto sp = stft(sig, cfg);
      double acc = 0.0;
      for (int64_t i = 0; i < sp.values.numel(); ++i) acc += c[i] * sp.values[i];
      return acc;
    };
    const double numeric = (eval(wp) - eval(wm)) / (2.0 * h);
    CHECK(std::abs(analytic - numeric) /
              std::max({std::abs(analytic), std::abs(numeric), 1e-8}) <=
          1e-4);
  }

  SUBCASE("stft + magnitude") {
    auto s_probe = magnitude(stft(w, cfg));
    Tensor c(s_probe.values.shape());
    rng.fill_normal(c.data(), c.numel(), 1.0);

    ad::Var leaf = ad::make_leaf(Tensor::from_vector(w.samples), true);
    ad::Var out = magnitude_op(stft_op(leaf, cfg));
    ad::Var loss = ad::scale(ad::mean_all(ad::mul(out, ad::constant(c))),
                             static_cast<double>(c.numel()));
    ad::backward(loss);

    std::vector<double> dir(static_cast<size_t>(n));
    rng.fill_normal(dir.data(), n, 1.0);
    double analytic = 0.0;
    for (int64_t i = 0; i < n; ++i) analytic += leaf->grad[i] * dir[static_cast<size_t>(i)];

    const double h = 1e-5;
    Waveform wp = w, wm = w;
    for (int64_t i = 0; i < n; ++i) {
      wp.samples[static_cast<size_t>(i)] += h * dir[static_cast<size_t>(i)];
      wm.samples[static_cast<size_t>(i)] -= h * dir[static_cast<size_t>(i)];
    }
    auto eval = [&](const Waveform& sig) {
      auto sp = magnitude(stft(sig, cfg));
      double acc = 0.0;
      for (int64_t i = 0; i < sp.values.numel(); ++i) acc += c[i] * sp.values[i];
      return acc;
    };
    const double numeric = (eval(wp) - eval(wm)) / (2.0 * h);
    CHECK(std::abs(analytic - numeric) /
              std::max({std::abs(analytic), std::abs(numeric), 1e-8}) <=
          1e-4);
  }
}
