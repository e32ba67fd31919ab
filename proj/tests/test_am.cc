// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Frame-count identity, determinism, freezing semantics, gradient
// pass-through to the input features, training presets, checkpoint and
// alignment round trips.

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mimicenh/acoustic_model.h"
#include "mimicenh/common.h"
#include "mimicenh/losses.h"
#include "mimicenh/rng.h"

using namespace mimicenh;

namespace {

AmConfig tiny_config(int bins = 33, int senones = 6) {
  AmConfig cfg;
  cfg.layers_per_block = 2;
  cfg.block_channels = {2, 4, 8, 16};
  cfg.n_senones = senones;
  cfg.input_bins = bins;
  return cfg;
}

Tensor random_mag(int64_t t, int64_t f, uint64_t seed) {
  Tensor m({t, f});
  Rng rng(seed);
  rng.fill_uniform(m.data(), m.numel(), 0.0, 1.0);
  return m;
}

// Separable toy set: each senone concentrates energy in its own bin band.
std::vector<AmExample> toy_examples(int n, int t, int bins, int senones,
                                    uint64_t seed) {
  std::vector<AmExample> out;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    AmExample ex;
    ex.utt_id = "toy_" + std::to_string(i);
    ex.mag = Tensor({t, bins});
    ex.labels.resize(static_cast<size_t>(t));
    int64_t frame = 0;
    while (frame < t) {
      const int senone = static_cast<int>(rng.uniform_int(senones));
      const int64_t span = std::min<int64_t>(3 + rng.uniform_int(6), t - frame);
      const int center = 2 + senone * (bins - 4) / senones;
      for (int64_t ti = frame; ti < frame + span; ++ti) {
        ex.labels[static_cast<size_t>(ti)] = senone;
        for (int k = 0; k < bins; ++k) {
          const double d = (k - center) / 2.0;
          ex.mag.at2(ti, k) = std::exp(-d * d) + 0.05 * rng.uniform();
        }
      }
      frame += span;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST_CASE("am_forward: output frame count equals input frame count") {
  AcousticModel am = AcousticModel::init(tiny_config(), 1);
  for (int64_t t : {1, 2, 7, 15, 16, 17, 31, 64, 67, 100}) {
    const Tensor mag = random_mag(t, 33, 10 + static_cast<uint64_t>(t));
    const SenonePosteriorgram post = am.forward_plain(mag);
    CHECK(post.logits.dim(0) == t);
    CHECK(post.logits.dim(1) == 6);
    CHECK(post.logits.all_finite());
  }
}

TEST_CASE("am_forward: deterministic, bin mismatch rejected") {
  AcousticModel am = AcousticModel::init(tiny_config(), 2);
  const Tensor mag = random_mag(40, 33, 77);
  const Tensor a = am.forward_plain(mag).logits;
  const Tensor b = am.forward_plain(mag).logits;
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);

  const Tensor bad = random_mag(40, 32, 78);
  CHECK_THROWS_AS(am.forward_plain(bad), ValidationError);

  MagnitudeSpectrogram spec;
  spec.values = bad;
  CHECK_THROWS_AS(am_forward(spec, am), ValidationError);
}

TEST_CASE("am config validation") {
  AmConfig bad = tiny_config();
  bad.n_split = 8;  // != 2^n_blocks
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  AmConfig bad2 = tiny_config();
  bad2.block_channels = {2, 4, 8, 12};  // 12 % 16 != 0
  CHECK_THROWS_AS(bad2.validate(), ConfigError);

  AmConfig bad3 = tiny_config();
  bad3.n_senones = 1;
  CHECK_THROWS_AS(bad3.validate(), ConfigError);
}

TEST_CASE("freeze: gradients flow to inputs, parameters never move") {
  AcousticModel am = AcousticModel::init(tiny_config(), 3);
  am.freeze();
  const auto fp0 = am.fingerprint();

  const Tensor mag = random_mag(24, 33, 99);
  std::vector<int> labels(24);
  Rng rng(5);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_int(6));

  ad::Var input = ad::make_leaf(mag, true);
  ad::Var loss = loss_mimic_hard(am.forward(input), labels);
  ad::backward(loss);

  REQUIRE(input->grad_allocated);
  double grad_norm = 0.0;
  for (int64_t i = 0; i < input->grad.numel(); ++i)
    grad_norm += input->grad[i] * input->grad[i];
  CHECK(grad_norm > 0.0);

  // Central finite differences on the magnitude input (step 1e-4): the
  // documented gradient pass-through contract for the frozen teacher.
  Tensor probe = mag;
  for (int check = 0; check < 8; ++check) {
    const int64_t idx = rng.uniform_int(probe.numel());
    const double h = 1e-4;
    const double orig = probe[idx];
    probe[idx] = orig + h;
    const double lp = loss_mimic_hard(am.forward_plain(probe).logits, labels);
    probe[idx] = orig - h;
    const double lm = loss_mimic_hard(am.forward_plain(probe).logits, labels);
    probe[idx] = orig;
    const double numeric = (lp - lm) / (2.0 * h);
    const double analytic = input->grad[idx];
    CHECK(std::abs(analytic - numeric) /
              std::max({std::abs(analytic), std::abs(numeric), 1e-8}) <=
          1e-3);
  }

  CHECK(am.fingerprint() == fp0);

  // Unfreeze and take one optimizer step: fingerprint must change.
  am.unfreeze();
  Adam opt(AdamConfig{.learning_rate = 1e-3});
  opt.register_params(am.params());
  opt.zero_grad();
  ad::Var loss2 = loss_mimic_hard(am.forward(ad::constant(mag)), labels);
  ad::backward(loss2);
  opt.step();
  CHECK(am.fingerprint().digest != fp0.digest);
}

TEST_CASE("train_am: presets, zero-epoch identity, label validation") {
  const int bins = 33, senones = 4;
  auto train = toy_examples(16, 24, bins, senones, 11);
  auto val = toy_examples(6, 24, bins, senones, 13);

  SUBCASE("zero epochs leaves the fingerprint unchanged") {
    AcousticModel am = AcousticModel::init(tiny_config(bins, senones), 7);
    const auto fp0 = am.fingerprint();
    AmTrainConfig cfg;
    cfg.preset = "light";
    cfg.light_epochs = 0;
    auto res = train_am(am, train, val, cfg);
    CHECK(res.epochs_run == 0);
    CHECK(am.fingerprint() == fp0);
  }

  SUBCASE("light preset runs exactly 5 epochs") {
    AcousticModel am = AcousticModel::init(tiny_config(bins, senones), 7);
    AmTrainConfig cfg;
    cfg.preset = "light";
    cfg.seed = 1;
    auto res = train_am(am, train, val, cfg);
    CHECK(res.epochs_run == 5);
    CHECK(res.curve.size() == 5);
    // training on a separable toy set reduces the CE
    CHECK(res.curve.back().train_ce < res.curve.front().train_ce);
  }

  SUBCASE("converged preset learns the separable toy set") {
    AcousticModel am = AcousticModel::init(tiny_config(bins, senones), 7);
    AmTrainConfig cfg;
    cfg.preset = "converged";
    cfg.max_epochs = 25;
    cfg.seed = 2;
    cfg.learning_rate = 3e-3;
    auto res = train_am(am, train, val, cfg);
    CHECK(res.curve.back().val_accuracy >= 0.8);
  }

  SUBCASE("label/frame mismatch reported with utterance ids") {
    AcousticModel am = AcousticModel::init(tiny_config(bins, senones), 7);
    auto broken = train;
    broken[2].labels.pop_back();
    broken[5].labels.push_back(0);
    AmTrainConfig cfg;
    try {
      train_am(am, broken, val, cfg);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("toy_2") != std::string::npos);
      CHECK(msg.find("toy_5") != std::string::npos);
    }
  }

  SUBCASE("frozen model cannot be trained") {
    AcousticModel am = AcousticModel::init(tiny_config(bins, senones), 7);
    am.freeze();
    AmTrainConfig cfg;
    CHECK_THROWS_AS(train_am(am, train, val, cfg), ConfigError);
  }
}

TEST_CASE("checkpoint: save/load round trip preserves fingerprint and config") {
  namespace fs = std::filesystem;
  const std::string dir = fs::temp_directory_path() / "mimicenh_am_ckpt";
  fs::create_directories(dir);
  const std::string path = dir + "/am.ckpt";

  AcousticModel am = AcousticModel::init(tiny_config(), 21);
  am.save(path, {{"note", "test"}});
  const auto fp0 = am.fingerprint();

  AcousticModel loaded = AcousticModel::from_checkpoint(path);
  CHECK(loaded.fingerprint() == fp0);
  CHECK(loaded.config().input_bins == 33);
  CHECK(loaded.config().n_senones == 6);

  const Tensor mag = random_mag(19, 33, 5);
  const Tensor a = am.forward_plain(mag).logits;
  const Tensor b = loaded.forward_plain(mag).logits;
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);

  // Corrupt one payload byte: load must fail on the fingerprint check.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-9, std::ios::end);
    char c;
    f.seekg(-9, std::ios::end);
    f.get(c);
    f.seekp(-9, std::ios::end);
    c = static_cast<char>(c ^ 0x01);
    f.put(c);
  }
  CHECK_THROWS_AS(AcousticModel::from_checkpoint(path), DataError);
}

TEST_CASE("alignment files: write/read round trip and error reporting") {
  namespace fs = std::filesystem;
  const std::string dir = fs::temp_directory_path() / "mimicenh_align";
  fs::create_directories(dir);
  const std::string path = dir + "/a.align";

  std::vector<AlignmentRecord> recs = {{"utt_a", {0, 1, 1, 2, 0}},
                                       {"utt_b", {3, 3, 3}}};
  write_alignment_file(path, recs);
  auto got = read_alignment_file(path);
  REQUIRE(got.size() == 2);
  CHECK(got[0].utt_id == "utt_a");
  CHECK(got[0].senone_ids == std::vector<int>{0, 1, 1, 2, 0});
  CHECK(got[1].senone_ids == std::vector<int>{3, 3, 3});

  {
    std::ofstream bad(dir + "/bad.align");
    bad << "utt_x 4 1 2 3\n";  // declares 4 ids, provides 3
  }
  CHECK_THROWS_AS(read_alignment_file(dir + "/bad.align"), DataError);
}
