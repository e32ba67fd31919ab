// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/acoustic_model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mimicenh/checkpoint.h"
#include "mimicenh/common.h"
#include "mimicenh/losses.h"
#include "mimicenh/rng.h"

namespace mimicenh {
namespace {

constexpr double kActSlope = 0.1;  // conv-stack activation
constexpr double kNormEps = 1e-8;  // utterance standardization

int round_channels(int c, double scale) {
  return std::max<int>(1, static_cast<int>(std::llround(c * scale)));
}

}  // namespace

void AmConfig::validate() const {
  if (n_blocks < 1) throw ConfigError("am: n_blocks must be >= 1");
  if (layers_per_block < 1) throw ConfigError("am: layers_per_block must be >= 1");
  if (static_cast<int>(block_channels.size()) != n_blocks)
    throw ConfigError("am: block_channels size must equal n_blocks");
  if (n_split != (1 << n_blocks))
    throw ConfigError("am: n_split must equal 2^n_blocks so output frames match input");
  if (n_senones < 2) throw ConfigError("am: n_senones must be >= 2");
  if (input_bins < 1) throw ConfigError("am: input_bins must be >= 1");
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("am: scale must be in (0, 1]");
  const int last = scaled_channels(n_blocks - 1);
  if (last % n_split != 0)
    throw ConfigError("am: scaled channels of the last block (" + std::to_string(last) +
                      ") must be divisible by n_split (" + std::to_string(n_split) + ")");
  if (feature_norm != "utt_meanvar")
    throw ConfigError("am: unknown feature_norm: " + feature_norm);
}

int AmConfig::scaled_channels(int block) const {
  return round_channels(block_channels[static_cast<size_t>(block)], scale);
}

void to_json(nlohmann::json& j, const AmConfig& c) {
  j = nlohmann::json{{"n_blocks", c.n_blocks},
                     {"layers_per_block", c.layers_per_block},
                     {"block_channels", c.block_channels},
                     {"n_split", c.n_split},
                     {"n_senones", c.n_senones},
                     {"input_bins", c.input_bins},
                     {"scale", c.scale},
                     {"feature_norm", c.feature_norm}};
}

void from_json(const nlohmann::json& j, AmConfig& c) {
  c.n_blocks = j.value("n_blocks", 4);
  c.layers_per_block = j.value("layers_per_block", 3);
  c.block_channels = j.value("block_channels", std::vector<int>{128, 256, 512, 1024});
  c.n_split = j.value("n_split", 16);
  c.n_senones = j.value("n_senones", 12);
  c.input_bins = j.value("input_bins", 257);
  c.scale = j.value("scale", 1.0);
  c.feature_norm = j.value("feature_norm", "utt_meanvar");
}

std::vector<AlignmentRecord> read_alignment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open alignment file: " + path);
  std::vector<AlignmentRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    AlignmentRecord rec;
    int64_t n_frames = 0;
    if (!(ss >> rec.utt_id >> n_frames))
      throw DataError("malformed alignment record in " + path + ": " + line);
    int id;
    while (ss >> id) rec.senone_ids.push_back(id);
    if (static_cast<int64_t>(rec.senone_ids.size()) != n_frames)
      throw DataError("alignment record length mismatch for '" + rec.utt_id +
                      "' in " + path + " (declared " + std::to_string(n_frames) +
                      ", found " + std::to_string(rec.senone_ids.size()) + ")");
    records.push_back(std::move(rec));
  }
  return records;
}

void write_alignment_file(const std::string& path,
                          const std::vector<AlignmentRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write alignment file: " + path);
  for (const auto& rec : records) {
    out << rec.utt_id << ' ' << rec.senone_ids.size();
    for (int id : rec.senone_ids) out << ' ' << id;
    out << '\n';
  }
}

void AcousticModel::build_params(Rng& rng) {
  const double gain = leaky_relu_gain(kActSlope);
  int in_ch = 1;
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    const int out_ch = cfg_.scaled_channels(b);
    std::vector<ConvP> layers;
    for (int l = 0; l < cfg_.layers_per_block; ++l) {
      const int cin = l == 0 ? in_ch : out_ch;
      const std::string base = "block" + std::to_string(b) + ".layer" + std::to_string(l);
      ConvP p;
      // Residual branches start at zero so the stack begins as the plain
      // strided backbone; keeps activations bounded without norm layers.
      Tensor w_init = l == 0
                          ? init_uniform_fanin(rng, {out_ch, cin, 3, 3}, cin * 9, gain)
                          : Tensor({out_ch, cin, 3, 3});
      p.w = store_.create(base + ".w", std::move(w_init));
      p.b = store_.create(base + ".b", Tensor({out_ch}));
      layers.push_back(p);
    }
    blocks_.push_back(std::move(layers));
    ConvP proj;
    const std::string base = "block" + std::to_string(b) + ".proj";
    proj.w = store_.create(base + ".w",
                           init_uniform_fanin(rng, {out_ch, in_ch, 1, 1}, in_ch, 1.0));
    proj.b = store_.create(base + ".b", Tensor({out_ch}));
    projections_.push_back(proj);
    in_ch = out_ch;
  }
  // Each split group's affine layer reads its channels across the whole
  // frequency axis, so absolute formant positions stay observable.
  const int64_t group_ch = in_ch / cfg_.n_split;
  const int64_t head_in = group_ch * cfg_.input_bins;
  for (int g = 0; g < cfg_.n_split; ++g) {
    const std::string base = "head.g" + std::to_string(g);
    ConvP p;
    p.w = store_.create(base + ".w", init_uniform_fanin(rng, {cfg_.n_senones, head_in},
                                                        head_in, 1.0));
    p.b = store_.create(base + ".b", Tensor({cfg_.n_senones}));
    head_.push_back(p);
  }
}

AcousticModel AcousticModel::init(const AmConfig& cfg, uint64_t seed) {
  cfg.validate();
  AcousticModel m;
  m.cfg_ = cfg;
  Rng rng(mix_seed(seed, "am_init"));
  m.build_params(rng);
  return m;
}

AcousticModel AcousticModel::from_checkpoint(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.payload_type != "acoustic_model")
    throw DataError("checkpoint is not an acoustic model: " + path);
  AmConfig cfg = ck.config.get<AmConfig>();
  AcousticModel m = AcousticModel::init(cfg, 0);
  restore_params(ck, m.store_.params());
  return m;
}

ad::Var AcousticModel::forward(const ad::Var& mag) const {
  if (mag->value.ndim() != 2)
    throw ValidationError("am_forward: magnitude input must be [T,F]");
  const int64_t t_in = mag->value.dim(0);
  if (mag->value.dim(1) != cfg_.input_bins)
    throw ValidationError("am_forward: bin mismatch (got " +
                          std::to_string(mag->value.dim(1)) + ", model expects " +
                          std::to_string(cfg_.input_bins) + ")");

  // Per-utterance standardization, differentiable so feature gradients
  // reach the enhancer through it.
  ad::Var mu = ad::mean_all(mag);
  ad::Var centered = ad::sub_scalar_var(mag, mu);
  ad::Var var = ad::mean_all(ad::square(centered));
  ad::Var sigma = ad::sqrt_elem(ad::add_scalar(var, kNormEps));
  ad::Var x = ad::div_scalar_var(centered, sigma);

  // Pad frames (edge replication) to a multiple of the total time
  // downsampling so every block halves exactly; trimmed at the end.
  const int64_t t_pad =
      ((std::max<int64_t>(t_in, cfg_.n_split) + cfg_.n_split - 1) / cfg_.n_split) *
      cfg_.n_split;
  x = ad::pad_axis0_edge(x, t_pad);
  x = ad::reshape(x, {1, t_pad, cfg_.input_bins});

  bool first_layer = true;
  for (size_t b = 0; b < blocks_.size(); ++b) {
    // Strided layer with projection shortcut.
    ad::Var pre = first_layer ? x : ad::leaky_relu(x, kActSlope);
    first_layer = false;
    ad::Var h = conv2d(pre, blocks_[b][0].w, blocks_[b][0].b, 2, 1, 1);
    ad::Var sc = conv2d(x, projections_[b].w, projections_[b].b, 2, 0, 0);
    x = ad::add(h, sc);
    for (size_t l = 1; l < blocks_[b].size(); ++l) {
      ad::Var hh = conv2d(ad::leaky_relu(x, kActSlope), blocks_[b][l].w,
                          blocks_[b][l].b, 1, 1, 1);
      x = ad::add(x, hh);
    }
  }
  x = ad::leaky_relu(x, kActSlope);

  const int64_t c_final = x->value.dim(0);
  const int64_t group_ch = c_final / cfg_.n_split;
  std::vector<ad::Var> groups;
  groups.reserve(static_cast<size_t>(cfg_.n_split));
  for (int g = 0; g < cfg_.n_split; ++g) {
    ad::Var part = ad::slice_axis0(x, g * group_ch, (g + 1) * group_ch);
    groups.push_back(ad::affine_time_freq(part, head_[static_cast<size_t>(g)].w,
                                          head_[static_cast<size_t>(g)].b));
  }
  ad::Var out = ad::interleave_rows(groups);  // [t_pad, S]
  return ad::slice_axis0(out, 0, t_in);
}

SenonePosteriorgram AcousticModel::forward_plain(const Tensor& mag) const {
  ad::Var out = forward(ad::constant(mag));
  return SenonePosteriorgram{out->value};
}

void AcousticModel::freeze() {
  frozen_ = true;
  store_.set_trainable(false);
}

void AcousticModel::unfreeze() {
  frozen_ = false;
  store_.set_trainable(true);
}

void AcousticModel::save(const std::string& path, const nlohmann::json& extra) const {
  save_checkpoint(path, "acoustic_model", nlohmann::json(cfg_), store_.params(), extra);
}

SenonePosteriorgram am_forward(const MagnitudeSpectrogram& m,
                               const AcousticModel& model) {
  if (m.bins() != model.config().input_bins)
    throw ValidationError("am_forward: spectrogram bins do not match model input_bins");
  return model.forward_plain(m.values);
}

AmTrainResult train_am(AcousticModel& model, const std::vector<AmExample>& train,
                       const std::vector<AmExample>& val, const AmTrainConfig& cfg) {
  if (cfg.preset != "light" && cfg.preset != "converged")
    throw ConfigError("train_am: preset must be 'light' or 'converged'");
  if (model.frozen()) throw ConfigError("train_am: model is frozen");

  // Validate label lengths up front, reporting every offender.
  std::string offenders;
  for (const auto* split : {&train, &val})
    for (const auto& ex : *split)
      if (static_cast<int64_t>(ex.labels.size()) != ex.mag.dim(0)) {
        if (!offenders.empty()) offenders += ", ";
        offenders += ex.utt_id + " (" + std::to_string(ex.mag.dim(0)) + " frames vs " +
                     std::to_string(ex.labels.size()) + " labels)";
      }
  if (!offenders.empty())
    throw DataError("train_am: label/frame mismatch for: " + offenders);
  if (train.empty()) throw DataError("train_am: empty training set");

  Adam opt(AdamConfig{.learning_rate = cfg.learning_rate});
  opt.register_params(model.params());

  const int epochs_cap = cfg.preset == "light" ? cfg.light_epochs : cfg.max_epochs;
  AmTrainResult result;
  double best_val = 1e300;
  int since_best = 0;

  for (int epoch = 0; epoch < epochs_cap; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, mix_seed(static_cast<uint64_t>(epoch), "am_epoch")));
    const auto order = shuffle_rng.permutation(static_cast<int>(train.size()));

    double ce_sum = 0.0;
    int in_batch = 0;
    opt.zero_grad();
    for (int idx : order) {
      const AmExample& ex = train[static_cast<size_t>(idx)];
      ad::Var logits = model.forward(ad::constant(ex.mag));
      ad::Var loss = cross_entropy_mean(logits, ex.labels);
      ce_sum += loss->value[0];
      ad::backward(loss);
      if (++in_batch >= cfg.batch_size) {
        opt.step();
        opt.zero_grad();
        in_batch = 0;
      }
    }
    if (in_batch > 0) {
      opt.step();
      opt.zero_grad();
    }

    AmEpochStats stats;
    stats.epoch = epoch;
    stats.train_ce = ce_sum / static_cast<double>(train.size());
    if (!val.empty()) {
      double vce = 0.0, vacc = 0.0;
      for (const auto& ex : val) {
        SenonePosteriorgram post = model.forward_plain(ex.mag);
        vce += loss_mimic_hard(post.logits, ex.labels);
        int64_t hits = 0;
        for (int64_t t = 0; t < post.logits.dim(0); ++t) {
          const double* row = post.logits.data() + t * post.logits.dim(1);
          int64_t best = 0;
          for (int64_t s = 1; s < post.logits.dim(1); ++s)
            if (row[s] > row[best]) best = s;
          if (best == ex.labels[static_cast<size_t>(t)]) ++hits;
        }
        vacc += static_cast<double>(hits) / static_cast<double>(post.logits.dim(0));
      }
      stats.val_ce = vce / static_cast<double>(val.size());
      stats.val_accuracy = vacc / static_cast<double>(val.size());
    }
    result.curve.push_back(stats);
    ++result.epochs_run;

    if (cfg.preset == "converged" && !val.empty()) {
      if (stats.val_ce < best_val - 1e-6) {
        best_val = stats.val_ce;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  return result;
}

}  // namespace mimicenh
