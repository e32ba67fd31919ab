// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/trainer.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "mimicenh/common.h"
#include "mimicenh/rng.h"

namespace fs = std::filesystem;

namespace mimicenh {
namespace {

bool is_soft_mimic(MimicKind k) {
  return k == MimicKind::kSoftL1 || k == MimicKind::kSoftL2 || k == MimicKind::kKd;
}

struct SplitCorpus {
  std::vector<UtteranceRecord> train, val, test;
};

SplitCorpus load_split_corpus(const DataConfig& data) {
  const auto records = read_manifest(data.manifest);
  const std::string base_dir = fs::path(data.manifest).parent_path().string();
  SplitCorpus c;
  for (const auto& rec : records) {
    UtteranceRecord u = load_utterance(rec, base_dir);
    if (rec.split == data.train_split)
      c.train.push_back(std::move(u));
    else if (rec.split == data.val_split)
      c.val.push_back(std::move(u));
    else if (rec.split == data.test_split)
      c.test.push_back(std::move(u));
  }
  if (c.train.empty())
    throw DataError("no utterances in train split '" + data.train_split + "'");
  return c;
}

// Zero-padded [1, ceil(L/mult)*mult] row for the enhancer.
Tensor padded_input(const std::vector<double>& x, int64_t begin, int64_t len,
                    int64_t mult) {
  const int64_t padded = ((len + mult - 1) / mult) * mult;
  Tensor t({1, padded});
  for (int64_t i = 0; i < len; ++i) t[i] = x[static_cast<size_t>(begin + i)];
  return t;
}

struct CropPlan {
  int64_t offset = 0;  // multiple of hop
  int64_t length = 0;
  int64_t frame_offset = 0;
};

CropPlan plan_crop(int64_t utt_len, const ExperimentConfig& cfg, uint64_t seed,
                   int epoch, const std::string& utt_id) {
  CropPlan p;
  const int64_t chunk = cfg.enhancer.chunk_length;
  if (utt_len <= chunk) {
    p.length = utt_len;
    return p;
  }
  const int64_t hop = cfg.stft.hop_length;
  Rng rng(mix_seed(mix_seed(seed, utt_id),
                   mix_seed(static_cast<uint64_t>(epoch), "crop")));
  const int64_t max_offset = (utt_len - chunk) / hop;
  p.offset = rng.uniform_int(max_offset + 1) * hop;
  p.length = chunk;
  p.frame_offset = p.offset / hop;
  return p;
}

struct StepGraph {
  ad::Var total;
  LossBreakdown breakdown;
};

// One utterance's end-to-end loss graph for the configured mode.
StepGraph build_step(const ExperimentConfig& cfg, const Enhancer& enh,
                     const AcousticModel* am, const UtteranceRecord& utt,
                     const CropPlan& crop, int channel) {
  const Waveform& noisy = utt.noisy[static_cast<size_t>(channel)];
  ad::Var x = ad::constant(
      padded_input(noisy.samples, crop.offset, crop.length, cfg.enhancer.length_multiple()));
  ad::Var y2d = enh.forward(x);
  ad::Var y2d_trim = crop.length == y2d->value.dim(1)
                         ? y2d
                         : ad::slice_last(y2d, 0, crop.length);
  ad::Var y = ad::reshape(y2d_trim, {crop.length});

  std::optional<double> time_raw, spec_raw, mimic_raw;
  std::vector<ad::Var> terms;

  if (cfg.loss.use_time_l1) {
    Tensor clean_crop({crop.length});
    for (int64_t i = 0; i < crop.length; ++i)
      clean_crop[i] = utt.clean.samples[static_cast<size_t>(crop.offset + i)];
    ad::Var term = loss_time_l1(y, clean_crop);
    time_raw = term->value[0];
    terms.push_back(ad::scale(term, cfg.loss.w_time));
  }

  Waveform clean_crop_wave;
  if (cfg.loss.use_specmag_l1 || is_soft_mimic(cfg.loss.mimic)) {
    clean_crop_wave.sample_rate = utt.clean.sample_rate;
    clean_crop_wave.samples.assign(
        utt.clean.samples.begin() + static_cast<int64_t>(crop.offset),
        utt.clean.samples.begin() + static_cast<int64_t>(crop.offset + crop.length));
  }

  if (cfg.loss.use_specmag_l1) {
    ad::Var term = loss_specmag_l1(y, clean_crop_wave, cfg.stft);
    spec_raw = term->value[0];
    terms.push_back(ad::scale(term, cfg.loss.w_spec));
  }

  if (cfg.loss.mimic != MimicKind::kNone) {
    ad::Var mag = magnitude_op(stft_op(y, cfg.stft));
    ad::Var logits = am->forward(mag);
    ad::Var term;
    if (cfg.loss.mimic == MimicKind::kHardCe) {
      const int64_t t_count = logits->value.dim(0);
      std::vector<int> labels(static_cast<size_t>(t_count));
      for (int64_t t = 0; t < t_count; ++t)
        labels[static_cast<size_t>(t)] =
            utt.labels[static_cast<size_t>(crop.frame_offset + t)];
      term = loss_mimic_hard(logits, labels);
    } else {
      // Teacher logits on clean magnitudes; constant w.r.t. the graph so
      // no gradient reaches the teacher through its own outputs.
      const Tensor clean_mag = magnitude(stft(clean_crop_wave, cfg.stft)).values;
      const Tensor teacher = am->forward_plain(clean_mag).logits;
      if (cfg.loss.mimic == MimicKind::kKd)
        term = loss_kd(logits, teacher, cfg.loss.kd_temperature);
      else
        term = loss_mimic_soft(logits, teacher, cfg.loss.mimic);
    }
    mimic_raw = term->value[0];
    terms.push_back(ad::scale(term, cfg.loss.w_mimic));
  }

  StepGraph g;
  g.total = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) g.total = ad::add(g.total, terms[i]);
  g.breakdown = combine(time_raw, spec_raw, mimic_raw, cfg.loss);
  return g;
}

UtteranceMetrics eval_utterance(const ExperimentConfig& cfg, const Enhancer& enh,
                                const AcousticModel* diag_am,
                                const UtteranceRecord& utt) {
  const Waveform& noisy = utt.noisy[static_cast<size_t>(cfg.eval_channel)];
  Waveform enhanced = enh.enhance(noisy);
  UtteranceMetrics m;
  m.utt_id = utt.utt_id;
  m.si_sdr_db = si_sdr(enhanced, utt.clean);
  m.estoi = estoi(enhanced, utt.clean);
  if (diag_am && !utt.labels.empty()) {
    const Tensor mag = magnitude(stft(enhanced, cfg.stft)).values;
    m.frame_accuracy =
        frame_accuracy(diag_am->forward_plain(mag).logits, utt.labels);
  }
  return m;
}

void write_training_log(const std::string& path, const ExperimentConfig& cfg,
                        const TrainingLog& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write training log: " + path);
  nlohmann::json meta{{"kind", "meta"}, {"config", cfg}};
  out << meta.dump() << "\n";
  for (const auto& s : log.steps) {
    nlohmann::json j{{"kind", "step"},
                     {"step", s.step},
                     {"epoch", s.epoch},
                     {"loss_total", s.loss.total},
                     {"loss_time_l1", s.loss.time_l1},
                     {"loss_spec_l1", s.loss.spec_l1},
                     {"loss_mimic", s.loss.mimic}};
    out << j.dump() << "\n";
  }
  for (const auto& e : log.epochs) {
    nlohmann::json j{{"kind", "epoch"},
                     {"epoch", e.epoch},
                     {"val_si_sdr", e.val_si_sdr},
                     {"val_estoi", e.val_estoi},
                     {"am_fingerprint", e.am_fingerprint},
                     {"enh_fingerprint", e.enh_fingerprint},
                     {"checkpoint", e.checkpoint_path},
                     {"wall_clock_s", e.wall_clock_s}};
    if (e.val_frame_accuracy) j["val_frame_accuracy"] = *e.val_frame_accuracy;
    out << j.dump() << "\n";
  }
}

}  // namespace

std::string train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kNonparallelMimic: return "nonparallel_mimic";
    case TrainMode::kNonparallelJoint: return "nonparallel_joint";
    case TrainMode::kParallelT: return "parallel_T";
    case TrainMode::kParallelTSm: return "parallel_T_SM";
    case TrainMode::kParallelTSmMimic: return "parallel_T_SM_mimic";
    case TrainMode::kParallelJoint: return "parallel_joint";
  }
  return "parallel_T";
}

TrainMode train_mode_from_name(const std::string& s) {
  if (s == "nonparallel_mimic") return TrainMode::kNonparallelMimic;
  if (s == "nonparallel_joint") return TrainMode::kNonparallelJoint;
  if (s == "parallel_T") return TrainMode::kParallelT;
  if (s == "parallel_T_SM") return TrainMode::kParallelTSm;
  if (s == "parallel_T_SM_mimic") return TrainMode::kParallelTSmMimic;
  if (s == "parallel_joint") return TrainMode::kParallelJoint;
  throw ConfigError("unknown training mode: " + s);
}

void ExperimentConfig::validate() const {
  if (version != 1) throw ConfigError("experiment config: unsupported version");
  loss.validate();
  enhancer.validate();
  stft.validate();
  if (optimizer.name != "adam")
    throw ConfigError("experiment config: unknown optimizer: " + optimizer.name);
  if (optimizer.learning_rate <= 0)
    throw ConfigError("experiment config: learning_rate must be positive");
  if (optimizer.batch_size < 1)
    throw ConfigError("experiment config: batch_size must be >= 1");
  if (optimizer.epochs < 1) throw ConfigError("experiment config: epochs must be >= 1");
  if (eval_channel < 0) throw ConfigError("experiment config: eval_channel must be >= 0");

  const bool needs_am = loss.mimic != MimicKind::kNone;
  if (needs_am && am_checkpoint.empty())
    throw ConfigError("mode " + train_mode_name(mode) + " requires am_checkpoint");
  if (!needs_am && !am_checkpoint.empty())
    throw ConfigError("mode " + train_mode_name(mode) +
                      " does not use an acoustic model; remove am_checkpoint");

  auto require = [&](bool cond, const std::string& what) {
    if (!cond)
      throw ConfigError("illegal configuration for mode " + train_mode_name(mode) +
                        ": " + what);
  };
  switch (mode) {
    case TrainMode::kNonparallelMimic:
      require(loss.mimic == MimicKind::kHardCe, "requires mimic=hard_ce");
      require(!loss.use_time_l1 && !loss.use_specmag_l1,
              "non-parallel training cannot use losses that need clean waveforms");
      require(am_frozen, "acoustic model must stay frozen");
      break;
    case TrainMode::kNonparallelJoint:
      require(loss.mimic == MimicKind::kHardCe, "requires mimic=hard_ce");
      require(!loss.use_time_l1 && !loss.use_specmag_l1,
              "non-parallel training cannot use losses that need clean waveforms");
      require(!am_frozen, "joint training requires am_frozen=false");
      break;
    case TrainMode::kParallelT:
      require(loss.mimic == MimicKind::kNone, "forbids any mimic loss");
      require(loss.use_time_l1, "requires the time-domain L1 loss");
      require(!loss.use_specmag_l1, "forbids the spectral magnitude loss");
      require(am_frozen, "am_frozen flag is fixed true when no model is trained");
      break;
    case TrainMode::kParallelTSm:
      require(loss.mimic == MimicKind::kNone, "forbids any mimic loss");
      require(loss.use_time_l1 && loss.use_specmag_l1,
              "requires time and spectral magnitude losses");
      require(am_frozen, "am_frozen flag is fixed true when no model is trained");
      break;
    case TrainMode::kParallelTSmMimic:
      require(is_soft_mimic(loss.mimic), "requires a soft mimic loss (soft_l1/soft_l2/kd)");
      require(loss.use_time_l1 && loss.use_specmag_l1,
              "requires time and spectral magnitude losses");
      require(am_frozen, "acoustic model must stay frozen");
      break;
    case TrainMode::kParallelJoint:
      require(is_soft_mimic(loss.mimic), "requires a soft mimic loss (soft_l1/soft_l2/kd)");
      require(loss.use_time_l1 && loss.use_specmag_l1,
              "requires time and spectral magnitude losses");
      require(!am_frozen, "joint training requires am_frozen=false");
      break;
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{
      {"version", c.version},
      {"mode", train_mode_name(c.mode)},
      {"am_checkpoint", c.am_checkpoint},
      {"am_frozen", c.am_frozen},
      {"loss", c.loss},
      {"optimizer",
       {{"name", c.optimizer.name},
        {"learning_rate", c.optimizer.learning_rate},
        {"batch_size", c.optimizer.batch_size},
        {"epochs", c.optimizer.epochs},
        {"seed", c.optimizer.seed}}},
      {"data",
       {{"manifest", c.data.manifest},
        {"train_split", c.data.train_split},
        {"val_split", c.data.val_split},
        {"test_split", c.data.test_split}}},
      {"eval_channel", c.eval_channel},
      {"enhancer", c.enhancer},
      {"stft",
       {{"frame_length", c.stft.frame_length},
        {"hop_length", c.stft.hop_length},
        {"fft_size", c.stft.fft_size},
        {"window", c.stft.window == WindowKind::kHann    ? "hann"
                   : c.stft.window == WindowKind::kHamming ? "hamming"
                                                           : "rect"}}}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.version = j.value("version", 1);
  c.mode = train_mode_from_name(j.at("mode").get<std::string>());
  c.am_checkpoint = j.value("am_checkpoint", "");
  c.am_frozen = j.value("am_frozen", true);
  if (j.contains("loss")) c.loss = j.at("loss").get<LossConfig>();
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.optimizer.name = o.value("name", "adam");
    c.optimizer.learning_rate = o.value("learning_rate", 2e-4);
    c.optimizer.batch_size = o.value("batch_size", 4);
    c.optimizer.epochs = o.value("epochs", 12);
    c.optimizer.seed = o.value("seed", static_cast<uint64_t>(0));
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    c.data.manifest = d.value("manifest", "");
    c.data.train_split = d.value("train_split", "train");
    c.data.val_split = d.value("val_split", "val");
    c.data.test_split = d.value("test_split", "test");
  }
  c.eval_channel = j.value("eval_channel", 0);
  if (j.contains("enhancer")) c.enhancer = j.at("enhancer").get<EnhancerConfig>();
  if (j.contains("stft")) {
    const auto& s = j.at("stft");
    c.stft.frame_length = s.value("frame_length", 512);
    c.stft.hop_length = s.value("hop_length", 128);
    c.stft.fft_size = s.value("fft_size", 512);
    const std::string w = s.value("window", "hann");
    if (w == "hann")
      c.stft.window = WindowKind::kHann;
    else if (w == "hamming")
      c.stft.window = WindowKind::kHamming;
    else if (w == "rect")
      c.stft.window = WindowKind::kRect;
    else
      throw ConfigError("experiment config: unknown window: " + w);
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open experiment config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed experiment config " + path + ": " + e.what());
  }
  try {
    return j.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid experiment config " + path + ": " + e.what());
  }
}

int sample_channel(const UtteranceRecord& utt, int epoch, uint64_t seed) {
  if (utt.noisy.empty()) throw ValidationError("sample_channel: record has no channels");
  if (utt.noisy.size() == 1) return 0;
  Rng rng(mix_seed(mix_seed(seed, utt.utt_id),
                   mix_seed(static_cast<uint64_t>(epoch), "channel")));
  return static_cast<int>(rng.uniform_int(static_cast<int64_t>(utt.noisy.size())));
}

AcousticModel joint_init_from_clean(const std::string& am_checkpoint) {
  AcousticModel am = AcousticModel::from_checkpoint(am_checkpoint);
  am.unfreeze();
  return am;
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);

  SplitCorpus corpus = load_split_corpus(cfg.data);
  for (const auto* split : {&corpus.train, &corpus.val, &corpus.test})
    for (const auto& u : *split)
      if (cfg.eval_channel >= static_cast<int>(u.noisy.size()))
        throw DataError("eval_channel " + std::to_string(cfg.eval_channel) +
                        " out of range for utterance " + u.utt_id);

  const bool needs_am = cfg.loss.mimic != MimicKind::kNone;
  const bool joint = !cfg.am_frozen;
  std::unique_ptr<AcousticModel> am;
  std::unique_ptr<AcousticModel> diag_am;  // fixed reference for metrics
  if (needs_am) {
    am = std::make_unique<AcousticModel>(
        joint ? joint_init_from_clean(cfg.am_checkpoint)
              : AcousticModel::from_checkpoint(cfg.am_checkpoint));
    if (!joint) am->freeze();
    if (am->config().input_bins != cfg.stft.bins())
      throw ConfigError("acoustic model expects " +
                        std::to_string(am->config().input_bins) +
                        " bins but stft config yields " + std::to_string(cfg.stft.bins()));
    diag_am = std::make_unique<AcousticModel>(
        AcousticModel::from_checkpoint(cfg.am_checkpoint));
    diag_am->freeze();
  }

  Enhancer enh = Enhancer::init(cfg.enhancer, cfg.optimizer.seed);
  Adam opt(AdamConfig{.learning_rate = cfg.optimizer.learning_rate});
  opt.register_params(enh.params());
  if (needs_am && joint) opt.register_params(am->params());

  const std::string am_fp0 = needs_am ? am->fingerprint().digest : "";

  RunResult result;
  int64_t global_step = 0;
  for (int epoch = 0; epoch < cfg.optimizer.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng(mix_seed(cfg.optimizer.seed,
                             mix_seed(static_cast<uint64_t>(epoch), "enh_epoch")));
    const auto order = shuffle_rng.permutation(static_cast<int>(corpus.train.size()));

    int in_batch = 0;
    opt.zero_grad();
    for (int idx : order) {
      const UtteranceRecord& utt = corpus.train[static_cast<size_t>(idx)];
      const int channel = sample_channel(utt, epoch, cfg.optimizer.seed);
      const CropPlan crop =
          plan_crop(utt.clean.size(), cfg, cfg.optimizer.seed, epoch, utt.utt_id);
      StepGraph g = build_step(cfg, enh, am.get(), utt, crop, channel);

      if (!std::isfinite(g.breakdown.total)) {
        const std::string dump_path = (fs::path(out_dir) / "nan_dump.json").string();
        nlohmann::json dump{{"utt_id", utt.utt_id},
                            {"epoch", epoch},
                            {"step", global_step},
                            {"channel", channel},
                            {"loss_time_l1", g.breakdown.time_l1},
                            {"loss_spec_l1", g.breakdown.spec_l1},
                            {"loss_mimic", g.breakdown.mimic}};
        std::ofstream dump_out(dump_path, std::ios::trunc);
        dump_out << dump.dump(2) << "\n";
        throw NumericError("non-finite training loss at step " +
                           std::to_string(global_step) + " (utterance " + utt.utt_id +
                           "); diagnostics in " + dump_path);
      }

      ad::backward(g.total);
      result.log.steps.push_back({global_step++, epoch, g.breakdown});
      if (++in_batch >= cfg.optimizer.batch_size) {
        opt.step();
        opt.zero_grad();
        in_batch = 0;
      }
    }
    if (in_batch > 0) {
      opt.step();
      opt.zero_grad();
    }

    EpochRecord er;
    er.epoch = epoch;
    er.checkpoint_path =
        (fs::path(out_dir) / ("enhancer_epoch" + std::to_string(epoch) + ".ckpt"))
            .string();
    enh.save(er.checkpoint_path);
    er.enh_fingerprint = enh.fingerprint().digest;
    if (needs_am) er.am_fingerprint = am->fingerprint().digest;

    if (!corpus.val.empty()) {
      std::vector<UtteranceMetrics> val_metrics;
      for (const auto& u : corpus.val)
        val_metrics.push_back(eval_utterance(cfg, enh, diag_am.get(), u));
      MetricReport report = aggregate_metrics(std::move(val_metrics));
      er.val_si_sdr = report.si_sdr_db;
      er.val_estoi = report.estoi;
      er.val_frame_accuracy = report.frame_accuracy;
      result.final_val_report = std::move(report);
    }
    er.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(std::move(er));
  }

  if (needs_am && cfg.am_frozen) {
    result.am_fingerprint_constant = true;
    for (const auto& e : result.log.epochs)
      if (e.am_fingerprint != am_fp0) result.am_fingerprint_constant = false;
  }

  result.final_checkpoint = (fs::path(out_dir) / "enhancer_final.ckpt").string();
  enh.save(result.final_checkpoint);
  result.enhancer_fingerprint = enh.fingerprint();
  result.log_path = (fs::path(out_dir) / "training_log.jsonl").string();
  write_training_log(result.log_path, cfg, result.log);
  return result;
}

GradCheckReport gradcheck(const std::string& graph, int n_params, uint64_t seed) {
  static const std::vector<std::string> kGraphs = {
      "time_l1", "specmag_l1", "mimic_hard", "mimic_soft_l1", "mimic_soft_l2", "kd"};
  bool known = false;
  for (const auto& g : kGraphs) known = known || g == graph;
  if (!known) throw ConfigError("gradcheck: unknown graph: " + graph);

  StftConfig stft_cfg;
  stft_cfg.frame_length = 256;
  stft_cfg.hop_length = 128;
  stft_cfg.fft_size = 256;

  EnhancerConfig ecfg;
  ecfg.depth = 4;
  ecfg.base_channels = 4;
  ecfg.channel_cap = 16;
  ecfg.kernel = 5;
  ecfg.stride = 2;
  ecfg.chunk_length = 1024;
  Enhancer enh = Enhancer::init(ecfg, mix_seed(seed, "gc_enh"));

  AmConfig amcfg;
  amcfg.layers_per_block = 2;
  amcfg.block_channels = {4, 8, 16, 32};
  amcfg.n_senones = 6;
  amcfg.input_bins = stft_cfg.bins();
  AcousticModel am = AcousticModel::init(amcfg, mix_seed(seed, "gc_am"));
  am.freeze();

  const int64_t len = 1024;
  Rng data_rng(mix_seed(seed, "gc_data"));
  Waveform noisy, clean;
  noisy.samples.resize(static_cast<size_t>(len));
  clean.samples.resize(static_cast<size_t>(len));
  data_rng.fill_normal(noisy.samples.data(), len, 0.1);
  data_rng.fill_normal(clean.samples.data(), len, 0.1);
  const int64_t t_count = stft_frame_count(len, stft_cfg);
  std::vector<int> labels(static_cast<size_t>(t_count));
  for (auto& l : labels) l = static_cast<int>(data_rng.uniform_int(amcfg.n_senones));
  const Tensor clean_mag = magnitude(stft(clean, stft_cfg)).values;
  const Tensor teacher = am.forward_plain(clean_mag).logits;

  auto eval_loss = [&]() -> ad::Var {
    ad::Var x = ad::constant(Tensor::from_vector(noisy.samples).reshaped({1, len}));
    ad::Var y = ad::reshape(enh.forward(x), {len});
    if (graph == "time_l1") return loss_time_l1(y, Tensor::from_vector(clean.samples));
    if (graph == "specmag_l1") return loss_specmag_l1(y, clean, stft_cfg);
    ad::Var logits = am.forward(magnitude_op(stft_op(y, stft_cfg)));
    if (graph == "mimic_hard") return loss_mimic_hard(logits, labels);
    if (graph == "mimic_soft_l1") return loss_mimic_soft(logits, teacher, MimicKind::kSoftL1);
    if (graph == "mimic_soft_l2") return loss_mimic_soft(logits, teacher, MimicKind::kSoftL2);
    return loss_kd(logits, teacher, 2.0);
  };

  // Analytic gradients for every enhancer parameter.
  for (auto& p : enh.params()) p->clear_grad();
  ad::Var loss = eval_loss();
  ad::backward(loss);

  GradCheckReport report;
  report.graph = graph;

  const auto& params = enh.params();
  int64_t total = 0;
  for (const auto& p : params) total += p->value.numel();
  Rng pick_rng(mix_seed(seed, "gc_pick"));
  double max_rel = 0.0;
  for (int s = 0; s < n_params; ++s) {
    int64_t flat = pick_rng.uniform_int(total);
    size_t pi = 0;
    while (flat >= params[pi]->value.numel()) {
      flat -= params[pi]->value.numel();
      ++pi;
    }
    ad::Var p = params[pi];
    const double analytic = p->grad_allocated ? p->grad[flat] : 0.0;
    if (!std::isfinite(analytic))
      throw NumericError("gradcheck: non-finite analytic gradient at " + p->name +
                         "[" + std::to_string(flat) + "]");

    const double orig = p->value[flat];
    const double h = 1e-5 * std::max(1.0, std::abs(orig));
    p->value[flat] = orig + h;
    const double lp = eval_loss()->value[0];
    p->value[flat] = orig - h;
    const double lm = eval_loss()->value[0];
    p->value[flat] = orig;

    const double numeric = (lp - lm) / (2.0 * h);
    const double rel =
        std::abs(analytic - numeric) /
        std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
    report.entries.push_back({p->name, flat, analytic, numeric, rel});
  }

  report.max_rel_err = max_rel;
  report.passed = max_rel <= 1e-3;
  for (const auto& p : am.params()) {
    if (p->grad_allocated)
      for (int64_t i = 0; i < p->grad.numel(); ++i)
        if (p->grad[i] != 0.0) report.am_grads_absent = false;
  }
  return report;
}

}  // namespace mimicenh
