// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Core plumbing: RNG determinism, FFT vs naive DFT, WAV round trips,
// autodiff ops vs finite differences.

#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>

#include "mimicenh/autodiff.h"
#include "mimicenh/common.h"
#include "mimicenh/fft.h"
#include "mimicenh/fingerprint.h"
#include "mimicenh/nn.h"
#include "mimicenh/rng.h"
#include "mimicenh/tensor.h"
#include "mimicenh/wav.h"

using namespace mimicenh;

namespace {

// O(N^2) reference DFT.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x, int n) {
  std::vector<std::complex<double>> out(static_cast<size_t>(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int i = 0; i < n && i < static_cast<int>(x.size()); ++i) {
      const double ang = -2.0 * M_PI * k * i / n;
      acc += x[static_cast<size_t>(i)] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[static_cast<size_t>(k)] = acc;
  }
  return out;
}

// Scalar probe for finite-difference checks: loss = sum(c .* f(x)).
double fd_probe(const std::function<ad::Var(const ad::Var&)>& f, Tensor& x,
                const Tensor& c, int64_t idx, double h) {
  const double orig = x[idx];
  x[idx] = orig + h;
  ad::Var outp = f(ad::constant(x));
  double lp = 0.0;
  for (int64_t i = 0; i < outp->value.numel(); ++i) lp += c[i] * outp->value[i];
  x[idx] = orig - h;
  ad::Var outm = f(ad::constant(x));
  double lm = 0.0;
  for (int64_t i = 0; i < outm->value.numel(); ++i) lm += c[i] * outm->value[i];
  x[idx] = orig;
  return (lp - lm) / (2.0 * h);
}

// Analytic gradient of the same probe via backward().
Tensor analytic_probe(const std::function<ad::Var(const ad::Var&)>& f, const Tensor& x,
                      const Tensor& c) {
  ad::Var leaf = ad::make_leaf(x, true);
  ad::Var out = f(leaf);
  ad::Var weighted = ad::mul(out, ad::constant(c));
  // sum = mean * numel
  ad::Var loss = ad::scale(ad::mean_all(weighted), static_cast<double>(c.numel()));
  ad::backward(loss);
  return leaf->grad;
}

void check_grad_close(const Tensor& analytic,
                      const std::function<ad::Var(const ad::Var&)>& f, Tensor x,
                      const Tensor& c, Rng& rng, int n_checks, double tol) {
  for (int s = 0; s < n_checks; ++s) {
    const int64_t idx = rng.uniform_int(x.numel());
    const double num = fd_probe(f, x, c, idx, 1e-6);
    const double ana = analytic[idx];
    const double rel =
        std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-8});
    CAPTURE(idx);
    CAPTURE(num);
    CAPTURE(ana);
    CHECK(rel <= tol);
  }
}

}  // namespace

TEST_CASE("rng: deterministic and reasonably uniform") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(7);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += c.uniform();
  mean /= n;
  CHECK(std::abs(mean - 0.5) < 0.02);

  Rng d(9);
  double m = 0.0, v = 0.0;
  std::vector<double> xs(10000);
  d.fill_normal(xs.data(), 10000);
  for (double x : xs) m += x;
  m /= 10000;
  for (double x : xs) v += (x - m) * (x - m);
  v /= 10000;
  CHECK(std::abs(m) < 0.05);
  CHECK(std::abs(v - 1.0) < 0.08);

  CHECK(mix_seed(1, "a") != mix_seed(1, "b"));
  CHECK(mix_seed(1, "a") == mix_seed(1, "a"));
  CHECK(mix_seed(1, "a") != mix_seed(2, "a"));
}

TEST_CASE("fft: matches naive DFT and inverts") {
  Rng rng(3);
  std::vector<double> x(256);
  rng.fill_normal(x.data(), 256);

  auto fast = rfft(x, 256);
  auto slow = naive_dft(x, 256);
  for (size_t k = 0; k < fast.size(); ++k)
    CHECK(std::abs(fast[k] - slow[k]) <= 1e-9 * 256);

  auto back = irfft(fast, 256);
  for (int i = 0; i < 256; ++i) CHECK(back[static_cast<size_t>(i)] == doctest::Approx(x[static_cast<size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("wav: float32 and pcm16 round trips") {
  const std::string dir = std::filesystem::temp_directory_path() / "mimicenh_wav_test";
  std::filesystem::create_directories(dir);
  Waveform w;
  w.sample_rate = 16000;
  Rng rng(11);
  w.samples.resize(1000);
  rng.fill_uniform(w.samples.data(), 1000, -0.9, 0.9);

  const std::string f32 = dir + "/a.wav";
  write_wav(f32, w, WavEncoding::kFloat32);
  Waveform r32 = read_wav(f32);
  REQUIRE(r32.size() == w.size());
  CHECK(r32.sample_rate == 16000);
  for (int64_t i = 0; i < w.size(); ++i)
    CHECK(std::abs(r32.samples[static_cast<size_t>(i)] - w.samples[static_cast<size_t>(i)]) < 1e-7);

  const std::string p16 = dir + "/b.wav";
  write_wav(p16, w, WavEncoding::kPcm16);
  Waveform r16 = read_wav(p16);
  REQUIRE(r16.size() == w.size());
  for (int64_t i = 0; i < w.size(); ++i)
    CHECK(std::abs(r16.samples[static_cast<size_t>(i)] - w.samples[static_cast<size_t>(i)]) <= 0.5 / 32768.0 + 1e-12);

  CHECK_THROWS_AS(read_wav(dir + "/missing.wav"), DataError);
}

TEST_CASE("autodiff: elementwise and reduction ops match finite differences") {
  Rng rng(17);
  Tensor x({4, 6});
  rng.fill_normal(x.data(), x.numel(), 1.0);
  Tensor c({4, 6});
  rng.fill_normal(c.data(), c.numel(), 1.0);

  SUBCASE("leaky_relu") {
    auto f = [](const ad::Var& v) { return ad::leaky_relu(v, 0.3); };
    check_grad_close(analytic_probe(f, x, c), f, x, c, rng, 8, 1e-5);
  }
  SUBCASE("square+scale+add_scalar") {
    auto f = [](const ad::Var& v) {
      return ad::add_scalar(ad::scale(ad::square(v), 0.7), 1.5);
    };
    check_grad_close(analytic_probe(f, x, c), f, x, c, rng, 8, 1e-5);
  }
  SUBCASE("standardize composite") {
    auto f = [](const ad::Var& v) {
      ad::Var mu = ad::mean_all(v);
      ad::Var d = ad::sub_scalar_var(v, mu);
      ad::Var var = ad::mean_all(ad::square(d));
      ad::Var sigma = ad::sqrt_elem(ad::add_scalar(var, 1e-8));
      return ad::div_scalar_var(d, sigma);
    };
    check_grad_close(analytic_probe(f, x, c), f, x, c, rng, 8, 1e-4);
  }
  SUBCASE("slice and pad") {
    auto f = [](const ad::Var& v) {
      return ad::slice_axis0(ad::pad_axis0_edge(v, 7), 1, 6);
    };
    Tensor c2({5, 6});
    Rng r2(5);
    r2.fill_normal(c2.data(), c2.numel(), 1.0);
    check_grad_close(analytic_probe(f, x, c2), f, x, c2, r2, 8, 1e-5);
  }
  SUBCASE("mean_last_axis") {
    auto f = [](const ad::Var& v) { return ad::mean_last_axis(v); };
    Tensor c2({4});
    Rng r2(6);
    r2.fill_normal(c2.data(), c2.numel(), 1.0);
    check_grad_close(analytic_probe(f, x, c2), f, x, c2, r2, 6, 1e-5);
  }
}

TEST_CASE("autodiff: conv ops match finite differences") {
  Rng rng(23);

  SUBCASE("conv1d stride 2 w.r.t. input and weights") {
    Tensor x({3, 16});
    rng.fill_normal(x.data(), x.numel(), 1.0);
    Tensor w({4, 3, 5});
    rng.fill_normal(w.data(), w.numel(), 0.5);
    Tensor b({4});
    rng.fill_normal(b.data(), 4, 0.1);
    Tensor c({4, 8});
    rng.fill_normal(c.data(), c.numel(), 1.0);

    auto fx = [&](const ad::Var& v) {
      return conv1d(v, ad::constant(w), ad::constant(b), 2, 2);
    };
    check_grad_close(analytic_probe(fx, x, c), fx, x, c, rng, 10, 1e-5);

    auto fw = [&](const ad::Var& v) {
      return conv1d(ad::constant(x), v, ad::constant(b), 2, 2);
    };
    check_grad_close(analytic_probe(fw, w, c), fw, w, c, rng, 10, 1e-5);
  }

  SUBCASE("conv_transpose1d stride 2 w.r.t. input and weights") {
    Tensor x({3, 8});
    rng.fill_normal(x.data(), x.numel(), 1.0);
    Tensor w({3, 2, 5});
    rng.fill_normal(w.data(), w.numel(), 0.5);
    Tensor b({2});
    rng.fill_normal(b.data(), 2, 0.1);
    Tensor c({2, 16});
    rng.fill_normal(c.data(), c.numel(), 1.0);

    auto fx = [&](const ad::Var& v) {
      return conv_transpose1d(v, ad::constant(w), ad::constant(b), 2, 2, 1);
    };
    check_grad_close(analytic_probe(fx, x, c), fx, x, c, rng, 10, 1e-5);

    auto fw = [&](const ad::Var& v) {
      return conv_transpose1d(ad::constant(x), v, ad::constant(b), 2, 2, 1);
    };
    check_grad_close(analytic_probe(fw, w, c), fw, w, c, rng, 10, 1e-5);
  }

  SUBCASE("conv2d stride (2,1) w.r.t. input and weights") {
    Tensor x({2, 8, 7});
    rng.fill_normal(x.data(), x.numel(), 1.0);
    Tensor w({3, 2, 3, 3});
    rng.fill_normal(w.data(), w.numel(), 0.5);
    Tensor b({3});
    rng.fill_normal(b.data(), 3, 0.1);
    Tensor c({3, 4, 7});
    rng.fill_normal(c.data(), c.numel(), 1.0);

    auto fx = [&](const ad::Var& v) {
      return conv2d(v, ad::constant(w), ad::constant(b), 2, 1, 1);
    };
    check_grad_close(analytic_probe(fx, x, c), fx, x, c, rng, 10, 1e-5);

    auto fw = [&](const ad::Var& v) {
      return conv2d(ad::constant(x), v, ad::constant(b), 2, 1, 1);
    };
    check_grad_close(analytic_probe(fw, w, c), fw, w, c, rng, 10, 1e-5);
  }

  SUBCASE("affine_time_freq") {
    Tensor x({4, 3, 5});
    rng.fill_normal(x.data(), x.numel(), 1.0);
    Tensor w({6, 10});  // group of 2 channels x 5 bins
    rng.fill_normal(w.data(), w.numel(), 0.5);
    Tensor b({6});
    rng.fill_normal(b.data(), 6, 0.1);
    Tensor c({3, 6});
    rng.fill_normal(c.data(), c.numel(), 1.0);

    auto fx = [&](const ad::Var& v) {
      return ad::affine_time_freq(ad::slice_axis0(v, 1, 3), ad::constant(w),
                                  ad::constant(b));
    };
    check_grad_close(analytic_probe(fx, x, c), fx, x, c, rng, 10, 1e-5);

    auto fw = [&](const ad::Var& v) {
      return ad::affine_time_freq(ad::slice_axis0(ad::constant(x), 1, 3), v,
                                  ad::constant(b));
    };
    check_grad_close(analytic_probe(fw, w, c), fw, w, c, rng, 10, 1e-5);
  }

  SUBCASE("affine_time and interleave_rows") {
    Tensor x({6, 5});
    rng.fill_normal(x.data(), x.numel(), 1.0);
    Tensor w({4, 3});
    rng.fill_normal(w.data(), w.numel(), 0.5);
    Tensor b({4});
    rng.fill_normal(b.data(), 4, 0.1);
    Tensor c({10, 4});
    rng.fill_normal(c.data(), c.numel(), 1.0);

    auto f = [&](const ad::Var& v) {
      ad::Var g0 = ad::affine_time(ad::slice_axis0(v, 0, 3), ad::constant(w),
                                   ad::constant(b));
      ad::Var g1 = ad::affine_time(ad::slice_axis0(v, 3, 6), ad::constant(w),
                                   ad::constant(b));
      return ad::interleave_rows({g0, g1});
    };
    check_grad_close(analytic_probe(f, x, c), f, x, c, rng, 10, 1e-5);
  }
}

TEST_CASE("adam: rejects frozen params, updates trainable ones") {
  ParamStore store;
  Tensor init({4});
  init.fill(1.0);
  ad::Var p = store.create("p", init, true);

  Adam opt(AdamConfig{.learning_rate = 0.1});
  opt.register_params(store.params());
  p->ensure_grad();
  p->grad.fill(1.0);
  opt.step();
  CHECK(p->value[0] < 1.0);

  store.set_trainable(false);
  Adam opt2(AdamConfig{});
  CHECK_THROWS_AS(opt2.register_params(store.params()), ConfigError);
}

TEST_CASE("fingerprint: sensitive to single-bit parameter changes") {
  ParamStore store;
  Rng rng(5);
  Tensor t({32});
  rng.fill_normal(t.data(), 32, 1.0);
  ad::Var p = store.create("w", t, true);

  const auto fp1 = fingerprint_params(store.params());
  const auto fp2 = fingerprint_params(store.params());
  CHECK(fp1 == fp2);

  p->value[7] = std::nextafter(p->value[7], 1e300);  // 1 ulp
  const auto fp3 = fingerprint_params(store.params());
  CHECK(fp1.digest != fp3.digest);
}
