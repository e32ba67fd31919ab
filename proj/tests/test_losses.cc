// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Loss algebra vs naive oracles: scalar-loop L1/L2, 64-bit
// softmax-then-log cross entropy, tempered-softmax distillation, the
// anchor points (saturated margin, uniform logits) and the weighted
// combination arithmetic.

#include <doctest.h>

#include <cmath>

#include "mimicenh/acoustic_model.h"
#include "mimicenh/common.h"
#include "mimicenh/losses.h"
#include "mimicenh/rng.h"
#include "mimicenh/stft.h"

using namespace mimicenh;

namespace {

double oracle_ce(const Tensor& logits, const std::vector<int>& labels) {
  const int64_t t_count = logits.dim(0), s_count = logits.dim(1);
  double acc = 0.0;
  for (int64_t t = 0; t < t_count; ++t) {
    double denom = 0.0;
    for (int64_t s = 0; s < s_count; ++s) denom += std::exp(logits.at2(t, s));
    const double p = std::exp(logits.at2(t, labels[static_cast<size_t>(t)])) / denom;
    acc += -std::log(p);
  }
  return acc / static_cast<double>(t_count);
}

double oracle_kd(const Tensor& student, const Tensor& teacher, double temp) {
  const int64_t t_count = student.dim(0), s_count = student.dim(1);
  double acc = 0.0;
  for (int64_t t = 0; t < t_count; ++t) {
    double dt = 0.0, ds = 0.0;
    for (int64_t s = 0; s < s_count; ++s) {
      dt += std::exp(teacher.at2(t, s) / temp);
      ds += std::exp(student.at2(t, s) / temp);
    }
    for (int64_t s = 0; s < s_count; ++s) {
      const double pt = std::exp(teacher.at2(t, s) / temp) / dt;
      const double ps = std::exp(student.at2(t, s) / temp) / ds;
      acc += -pt * std::log(ps);
    }
  }
  return temp * temp * acc / static_cast<double>(t_count);
}

Waveform wave_of(std::vector<double> v) {
  Waveform w;
  w.samples = std::move(v);
  return w;
}

}  // namespace

TEST_CASE("loss_time_l1: anchors and loop oracle") {
  Rng rng(3);
  std::vector<double> a(500), b(500);
  rng.fill_normal(a.data(), 500, 1.0);
  rng.fill_normal(b.data(), 500, 1.0);

  CHECK(loss_time_l1(wave_of(a), wave_of(a)) == 0.0);

  std::vector<double> shifted = a;
  for (double& v : shifted) v += 0.5;
  CHECK(loss_time_l1(wave_of(shifted), wave_of(a)) == doctest::Approx(0.5).epsilon(1e-12));

  double oracle = 0.0;
  for (int i = 0; i < 500; ++i) oracle += std::abs(a[static_cast<size_t>(i)] - b[static_cast<size_t>(i)]);
  oracle /= 500.0;
  CHECK(std::abs(loss_time_l1(wave_of(a), wave_of(b)) - oracle) <= 1e-9);

  std::vector<double> shorter(400);
  CHECK_THROWS_AS(loss_time_l1(wave_of(shorter), wave_of(a)), ValidationError);
}

TEST_CASE("loss_specmag_l1: identical zero, impulse oracle, gradient") {
  StftConfig cfg;
  cfg.frame_length = 256;
  cfg.hop_length = 128;
  cfg.fft_size = 256;

  Rng rng(5);
  std::vector<double> x(1024);
  rng.fill_normal(x.data(), 1024, 0.3);
  CHECK(loss_specmag_l1(wave_of(x), wave_of(x), cfg) == 0.0);

  SUBCASE("zero clean vs unit impulse equals mean denoised magnitude") {
    std::vector<double> clean(1024, 0.0), den(1024, 0.0);
    den[0] = 1.0;
    const Tensor mag_d = magnitude(stft(wave_of(den), cfg)).values;
    const Tensor mag_c = magnitude(stft(wave_of(clean), cfg)).values;
    double want = 0.0;
    for (int64_t i = 0; i < mag_d.numel(); ++i) want += std::abs(mag_d[i] - mag_c[i]);
    want /= static_cast<double>(mag_d.numel());
    CHECK(loss_specmag_l1(wave_of(den), wave_of(clean), cfg) ==
          doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("gradient w.r.t. denoised samples matches finite differences") {
    std::vector<double> clean(512);
    std::vector<double> den(512);
    Rng r2(7);
    r2.fill_normal(clean.data(), 512, 0.3);
    r2.fill_normal(den.data(), 512, 0.3);

    ad::Var leaf = ad::make_leaf(Tensor::from_vector(den), true);
    ad::Var loss = loss_specmag_l1(leaf, wave_of(clean), cfg);
    ad::backward(loss);

    for (int check = 0; check < 6; ++check) {
      const int64_t idx = r2.uniform_int(512);
      const double h = 1e-6;
      std::vector<double> dp = den, dm = den;
      dp[static_cast<size_t>(idx)] += h;
      dm[static_cast<size_t>(idx)] -= h;
      const double numeric = (loss_specmag_l1(wave_of(dp), wave_of(clean), cfg) -
                              loss_specmag_l1(wave_of(dm), wave_of(clean), cfg)) /
                             (2.0 * h);
      const double analytic = leaf->grad[idx];
      CHECK(std::abs(analytic - numeric) /
                std::max({std::abs(analytic), std::abs(numeric), 1e-8}) <=
            1e-3);
    }
  }
}

TEST_CASE("loss_mimic_hard: saturation, uniform ln(S), naive oracle, errors") {
  const int64_t t_count = 24, s_count = 12;

  SUBCASE("+30 margin on the correct senone -> ~0") {
    Tensor logits({t_count, s_count});
    std::vector<int> labels(static_cast<size_t>(t_count));
    Rng rng(11);
    for (int64_t t = 0; t < t_count; ++t) {
      labels[static_cast<size_t>(t)] = static_cast<int>(rng.uniform_int(s_count));
      logits.at2(t, labels[static_cast<size_t>(t)]) = 30.0;
    }
    CHECK(loss_mimic_hard(logits, labels) <= 1e-9);
  }

  SUBCASE("uniform zero logits -> ln(S) exactly") {
    Tensor logits({t_count, s_count});
    std::vector<int> labels(static_cast<size_t>(t_count), 3);
    CHECK(std::abs(loss_mimic_hard(logits, labels) -
                   std::log(static_cast<double>(s_count))) <= 1e-12);
  }

  SUBCASE("random logits match softmax-then-log oracle") {
    Tensor logits({t_count, s_count});
    Rng rng(13);
    rng.fill_normal(logits.data(), logits.numel(), 2.0);
    std::vector<int> labels(static_cast<size_t>(t_count));
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(s_count));
    CHECK(std::abs(loss_mimic_hard(logits, labels) - oracle_ce(logits, labels)) <= 1e-6);
  }

  SUBCASE("frame mismatch and label range errors") {
    Tensor logits({t_count, s_count});
    std::vector<int> wrong(static_cast<size_t>(t_count) - 1, 0);
    CHECK_THROWS_AS(loss_mimic_hard(logits, wrong), ValidationError);
    std::vector<int> oob(static_cast<size_t>(t_count), static_cast<int>(s_count));
    CHECK_THROWS_AS(loss_mimic_hard(logits, oob), ValidationError);
  }
}

TEST_CASE("loss_mimic_soft: anchors, loop oracle, homogeneity, no teacher grad") {
  const int64_t t_count = 16, s_count = 10;
  Rng rng(17);
  Tensor a({t_count, s_count}), b({t_count, s_count});
  rng.fill_normal(a.data(), a.numel(), 1.5);
  rng.fill_normal(b.data(), b.numel(), 1.5);

  CHECK(loss_mimic_soft(a, a, MimicKind::kSoftL1) == 0.0);
  CHECK(loss_mimic_soft(a, a, MimicKind::kSoftL2) == 0.0);

  Tensor shifted = a;
  for (int64_t i = 0; i < shifted.numel(); ++i) shifted[i] += 2.0;
  CHECK(loss_mimic_soft(shifted, a, MimicKind::kSoftL1) ==
        doctest::Approx(2.0).epsilon(1e-12));

  double l2_oracle = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) l2_oracle += (a[i] - b[i]) * (a[i] - b[i]);
  l2_oracle /= static_cast<double>(a.numel());
  CHECK(std::abs(loss_mimic_soft(a, b, MimicKind::kSoftL2) - l2_oracle) <= 1e-9);

  SUBCASE("L1 homogeneity: loss(ax, ay) == |a| loss(x, y)") {
    for (double scale : {-2.5, 0.3, 7.0}) {
      Tensor sa = a, sb = b;
      for (int64_t i = 0; i < sa.numel(); ++i) {
        sa[i] *= scale;
        sb[i] *= scale;
      }
      CHECK(loss_mimic_soft(sa, sb, MimicKind::kSoftL1) ==
            doctest::Approx(std::abs(scale) * loss_mimic_soft(a, b, MimicKind::kSoftL1))
                .epsilon(1e-12));
    }
  }

  SUBCASE("shape mismatch rejected") {
    Tensor small({t_count - 1, s_count});
    CHECK_THROWS_AS(loss_mimic_soft(small, a, MimicKind::kSoftL1), ValidationError);
  }

  SUBCASE("backward through mimic losses leaves a frozen teacher untouched") {
    AmConfig cfg;
    cfg.layers_per_block = 1;
    cfg.block_channels = {2, 4, 8, 16};
    cfg.n_senones = 6;
    cfg.input_bins = 33;
    AcousticModel am = AcousticModel::init(cfg, 99);
    am.freeze();
    const auto fp0 = am.fingerprint();

    Rng r2(19);
    Tensor mag({20, 33});
    r2.fill_uniform(mag.data(), mag.numel(), 0.0, 1.0);
    for (int rep = 0; rep < 3; ++rep) {
      ad::Var input = ad::make_leaf(mag, true);
      ad::Var logits = am.forward(input);
      const Tensor teacher = am.forward_plain(mag).logits;
      ad::Var loss = loss_mimic_soft(logits, teacher, MimicKind::kSoftL1);
      ad::backward(loss);
      ad::Var loss2 = loss_kd(am.forward(ad::make_leaf(mag, true)), teacher, 3.0);
      ad::backward(loss2);
      std::vector<int> labels(20, 1);
      ad::Var loss3 = loss_mimic_hard(am.forward(ad::make_leaf(mag, true)), labels);
      ad::backward(loss3);
    }
    CHECK(am.fingerprint() == fp0);
  }
}

TEST_CASE("loss_kd: oracle checks and reductions") {
  const int64_t t_count = 14, s_count = 9;
  Rng rng(23);
  Tensor student({t_count, s_count}), teacher({t_count, s_count});
  rng.fill_normal(student.data(), student.numel(), 2.0);
  rng.fill_normal(teacher.data(), teacher.numel(), 2.0);

  SUBCASE("matches tempered oracle, several temperatures") {
    for (double temp : {0.5, 1.0, 2.0, 5.0})
      CHECK(std::abs(loss_kd(student, teacher, temp) -
                     oracle_kd(student, teacher, temp)) <= 1e-6 * temp * temp);
  }

  SUBCASE("identical logits -> self cross entropy (tempered target entropy)") {
    for (double temp : {1.0, 2.0})
      CHECK(std::abs(loss_kd(teacher, teacher, temp) -
                     oracle_kd(teacher, teacher, temp)) <= 1e-9);
  }

  SUBCASE("very large temperature approaches uniform-target behavior") {
    const double temp = 100.0;
    CHECK(std::abs(loss_kd(student, teacher, temp) - oracle_kd(student, teacher, temp)) <=
          1e-6 * temp * temp);
    // self-CE at huge T tends to T^2 ln(S) (uniform posterior entropy)
    const double self_ce = loss_kd(teacher, teacher, temp) / (temp * temp);
    CHECK(self_ce == doctest::Approx(std::log(static_cast<double>(s_count))).epsilon(1e-3));
  }

  SUBCASE("T=1 with saturated teacher reduces to hard CE") {
    Tensor sat({t_count, s_count});
    std::vector<int> labels(static_cast<size_t>(t_count));
    Rng r2(29);
    for (int64_t t = 0; t < t_count; ++t) {
      labels[static_cast<size_t>(t)] = static_cast<int>(r2.uniform_int(s_count));
      for (int64_t s = 0; s < s_count; ++s) sat.at2(t, s) = -40.0;
      sat.at2(t, labels[static_cast<size_t>(t)]) = 40.0;
    }
    CHECK(std::abs(loss_kd(student, sat, 1.0) - loss_mimic_hard(student, labels)) <= 1e-6);
  }

  SUBCASE("nonpositive temperature rejected") {
    CHECK_THROWS_AS(loss_kd(student, teacher, 0.0), ConfigError);
    CHECK_THROWS_AS(loss_kd(student, teacher, -1.0), ConfigError);
  }
}

TEST_CASE("combine: weighting arithmetic and config errors") {
  LossConfig cfg;
  cfg.use_time_l1 = true;
  cfg.use_specmag_l1 = true;
  cfg.mimic = MimicKind::kSoftL1;

  SUBCASE("weights (1,0,0) -> total equals time term") {
    cfg.w_time = 1.0;
    cfg.w_spec = 0.0;
    cfg.w_mimic = 0.0;
    auto b = combine(0.7, 0.3, 0.9, cfg);
    CHECK(b.total == 0.7);
    CHECK(b.spec_l1 == 0.0);
    CHECK(b.mimic == 0.0);
  }

  SUBCASE("weights (1,1,1), terms (0.2,0.3,0.5) -> 1.0") {
    auto b = combine(0.2, 0.3, 0.5, cfg);
    CHECK(b.total == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("total equals independent sum within 1e-12") {
    Rng rng(31);
    for (int i = 0; i < 20; ++i) {
      cfg.w_time = rng.uniform(0.0, 3.0);
      cfg.w_spec = rng.uniform(0.0, 3.0);
      cfg.w_mimic = rng.uniform(0.0, 3.0);
      if (cfg.w_time == 0 && cfg.w_spec == 0 && cfg.w_mimic == 0) continue;
      const double t = rng.uniform(0.0, 2.0), s = rng.uniform(0.0, 2.0),
                   m = rng.uniform(0.0, 2.0);
      auto b = combine(t, s, m, cfg);
      CHECK(std::abs(b.total - (cfg.w_time * t + cfg.w_spec * s + cfg.w_mimic * m)) <=
            1e-12);
      CHECK(std::abs(b.total - (b.time_l1 + b.spec_l1 + b.mimic)) <= 1e-12);
    }
  }

  SUBCASE("all weights zero rejected; missing enabled term rejected") {
    cfg.w_time = cfg.w_spec = cfg.w_mimic = 0.0;
    CHECK_THROWS_AS(combine(0.1, 0.1, 0.1, cfg), ConfigError);
    LossConfig cfg2;
    cfg2.use_time_l1 = true;
    CHECK_THROWS_AS(combine(std::nullopt, std::nullopt, std::nullopt, cfg2),
                    ValidationError);
    LossConfig none;
    CHECK_THROWS_AS(none.validate(), ConfigError);
  }
}

TEST_CASE("softmax_rows: rows sum to one") {
  Rng rng(37);
  Tensor logits({50, 12});
  rng.fill_normal(logits.data(), logits.numel(), 5.0);
  Tensor p = softmax_rows(logits);
  for (int64_t t = 0; t < p.dim(0); ++t) {
    double sum = 0.0;
    for (int64_t s = 0; s < p.dim(1); ++s) {
      CHECK(p.at2(t, s) >= 0.0);
      sum += p.at2(t, s);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}
