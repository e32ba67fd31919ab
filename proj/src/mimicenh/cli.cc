// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mimicenh/acoustic_model.h"
#include "mimicenh/common.h"
#include "mimicenh/corpus.h"
#include "mimicenh/enhancer.h"
#include "mimicenh/featgrid.h"
#include "mimicenh/fingerprint.h"
#include "mimicenh/mel.h"
#include "mimicenh/metrics.h"
#include "mimicenh/trainer.h"

namespace fs = std::filesystem;

namespace mimicenh {
namespace {

struct CliState {
  bool quiet = false;
};

void info(const CliState& st, const std::string& msg) {
  if (!st.quiet) std::printf("%s\n", msg.c_str());
}

CorpusSpec read_corpus_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus spec: " + path);
  nlohmann::json j;
  try {
    in >> j;
    return j.get<CorpusSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed corpus spec " + path + ": " + e.what());
  }
}

// Combined content hash over the manifest and every referenced file.
std::string corpus_hash(const std::string& manifest_path) {
  const auto records = read_manifest(manifest_path);
  const std::string base = fs::path(manifest_path).parent_path().string();
  Sha256 h;
  h.update(sha256_file_hex(manifest_path));
  for (const auto& r : records) {
    std::vector<std::string> paths = {r.clean_path, r.labels_path};
    paths.insert(paths.end(), r.noisy_paths.begin(), r.noisy_paths.end());
    for (const auto& p : paths)
      if (!p.empty()) h.update(sha256_file_hex((fs::path(base) / p).string()));
  }
  return h.hex_digest();
}

// The STFT config a corpus was generated with (stored beside the manifest).
CorpusSpec corpus_spec_for_manifest(const std::string& manifest_path) {
  const std::string spec_path =
      (fs::path(manifest_path).parent_path() / "corpus_spec.json").string();
  return read_corpus_spec(spec_path);
}

int cmd_synth(const CliState& st, const std::string& spec_path,
              const std::string& out_dir, std::optional<uint64_t> seed_override) {
  CorpusSpec spec = read_corpus_spec(spec_path);
  if (seed_override) spec.seed = *seed_override;
  spec.validate();
  SynthResult res = synth_corpus(spec, out_dir);
  int n_train = 0, n_val = 0, n_test = 0;
  for (const auto& r : res.records) {
    if (r.split == "train") ++n_train;
    if (r.split == "val") ++n_val;
    if (r.split == "test") ++n_test;
  }
  info(st, "synthesized " + std::to_string(res.records.size()) + " utterances (" +
               std::to_string(n_train) + " train / " + std::to_string(n_val) +
               " val / " + std::to_string(n_test) + " test)");
  std::printf("manifest: %s\n", res.manifest_path.c_str());
  std::printf("corpus hash: %s\n", corpus_hash(res.manifest_path).c_str());
  return 0;
}

std::vector<AmExample> make_am_examples(const std::vector<UtteranceRecord>& utts,
                                        const StftConfig& stft_cfg) {
  std::vector<AmExample> out;
  for (const auto& u : utts) {
    AmExample ex;
    ex.utt_id = u.utt_id;
    ex.mag = magnitude(stft(u.clean, stft_cfg)).values;
    ex.labels = u.labels;
    out.push_back(std::move(ex));
  }
  return out;
}

int cmd_train_am(const CliState& st, const std::string& manifest,
                 const std::string& out_path, const std::string& preset,
                 uint64_t seed, double scale, double lr, int max_epochs) {
  const CorpusSpec corpus_spec = corpus_spec_for_manifest(manifest);
  const StftConfig& stft_cfg = corpus_spec.stft;

  IngestReport ingest = ingest_external(manifest, stft_cfg);
  if (!ingest.rejections.empty()) {
    std::string msg = "rejected utterances:";
    for (const auto& r : ingest.rejections)
      msg += "\n  " + r.utt_id + ": " + r.reason;
    throw DataError(msg);
  }
  std::vector<UtteranceRecord> train, val;
  for (auto& u : ingest.accepted) {
    if (u.split == "train") train.push_back(std::move(u));
    else if (u.split == "val") val.push_back(std::move(u));
  }

  AmConfig am_cfg;
  am_cfg.n_senones = corpus_spec.n_senones;
  am_cfg.input_bins = stft_cfg.bins();
  am_cfg.scale = scale;
  AcousticModel model = AcousticModel::init(am_cfg, seed);

  AmTrainConfig tc;
  tc.preset = preset;
  tc.seed = seed;
  tc.learning_rate = lr;
  if (max_epochs > 0) tc.max_epochs = max_epochs;
  AmTrainResult res = train_am(model, make_am_examples(train, stft_cfg),
                               make_am_examples(val, stft_cfg), tc);

  nlohmann::json curve = nlohmann::json::array();
  for (const auto& e : res.curve)
    curve.push_back({{"epoch", e.epoch},
                     {"train_ce", e.train_ce},
                     {"val_ce", e.val_ce},
                     {"val_accuracy", e.val_accuracy}});
  model.save(out_path, {{"training_curve", curve}, {"preset", preset}});

  info(st, "preset: " + preset);
  std::printf("epochs: %d\n", res.epochs_run);
  if (!res.curve.empty())
    std::printf("final clean frame accuracy: %.4f\n", res.curve.back().val_accuracy);
  std::printf("checkpoint: %s\n", out_path.c_str());
  std::printf("fingerprint: %s\n", model.fingerprint().digest.c_str());
  return 0;
}

int cmd_train_enh(const CliState& st, const std::string& config_path,
                  const std::string& out_dir, uint64_t seed) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  cfg.optimizer.seed = seed;
  cfg.validate();
  RunResult res = run_experiment(cfg, out_dir);

  info(st, "mode: " + train_mode_name(cfg.mode));
  if (!res.log.epochs.empty()) {
    const auto& last = res.log.epochs.back();
    std::printf("final val SI-SDR: %.1f dB   eSTOI: %.1f\n", last.val_si_sdr,
                100.0 * last.val_estoi);
    if (last.val_frame_accuracy)
      std::printf("final val frame accuracy: %.4f\n", *last.val_frame_accuracy);
  }
  if (cfg.loss.mimic != MimicKind::kNone && cfg.am_frozen) {
    if (!res.am_fingerprint_constant)
      throw NumericError("frozen acoustic model fingerprint changed during training");
    std::printf("AM frozen: VERIFIED\n");
  }
  std::printf("checkpoint: %s\n", res.final_checkpoint.c_str());
  std::printf("enhancer fingerprint: %s\n", res.enhancer_fingerprint.digest.c_str());
  std::printf("training log: %s\n", res.log_path.c_str());
  return 0;
}

struct EvalPair {
  std::string utt_id;
  Waveform estimate;
  Waveform reference;
  std::vector<int> labels;
};

void print_report_table(const MetricReport& report, const std::string& row_name) {
  std::printf("%-24s %8s %8s%s\n", "Features", "SI-SDR", "eSTOI",
              report.frame_accuracy ? "   FrameAcc" : "");
  std::printf("%-24s %8.1f %8.1f", row_name.c_str(), report.si_sdr_db,
              100.0 * report.estoi);
  if (report.frame_accuracy) std::printf("   %8.4f", *report.frame_accuracy);
  std::printf("\n");
}

void write_report_jsonl(const std::string& path, const MetricReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write report: " + path);
  for (const auto& u : report.per_utterance) {
    nlohmann::json j{{"utt_id", u.utt_id},
                     {"si_sdr_db", u.si_sdr_db},
                     {"estoi", u.estoi}};
    if (u.frame_accuracy) j["frame_accuracy"] = *u.frame_accuracy;
    out << j.dump() << "\n";
  }
  nlohmann::json agg{{"aggregate", true},
                     {"si_sdr_db", report.si_sdr_db},
                     {"estoi", report.estoi},
                     {"n_utterances", report.per_utterance.size()}};
  if (report.frame_accuracy) agg["frame_accuracy"] = *report.frame_accuracy;
  out << agg.dump() << "\n";
}

int cmd_eval(const CliState& st, const std::string& manifest,
             const std::string& pairs_path, const std::string& checkpoint,
             bool passthrough, const std::string& split, int channel,
             const std::string& am_path, const std::string& report_path) {
  std::vector<EvalPair> pairs;
  StftConfig stft_cfg;
  bool have_stft = false;

  if (!pairs_path.empty()) {
    std::ifstream in(pairs_path);
    if (!in) throw DataError("cannot open pairs manifest: " + pairs_path);
    const std::string base = fs::path(pairs_path).parent_path().string();
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed pairs record: " + std::string(e.what()));
      }
      EvalPair p;
      p.utt_id = j.value("utt_id", "");
      const std::string est = j.value("estimate_path", "");
      const std::string ref = j.value("reference_path", "");
      if (est.empty() || ref.empty())
        throw DataError("pairs record missing estimate_path/reference_path for '" +
                        p.utt_id + "'");
      p.estimate = read_wav((fs::path(base) / est).string());
      p.reference = read_wav((fs::path(base) / ref).string());
      if (j.contains("alignment_path")) {
        const auto aligns = read_alignment_file(
            (fs::path(base) / j.at("alignment_path").get<std::string>()).string());
        if (!aligns.empty()) p.labels = aligns[0].senone_ids;
      }
      pairs.push_back(std::move(p));
    }
  } else {
    if (manifest.empty())
      throw ConfigError("eval: provide --manifest or --pairs");
    if (checkpoint.empty() == !passthrough)
      throw ConfigError("eval: exactly one of --checkpoint or --passthrough required");
    const CorpusSpec corpus_spec = corpus_spec_for_manifest(manifest);
    stft_cfg = corpus_spec.stft;
    have_stft = true;

    std::optional<Enhancer> enh;
    if (!checkpoint.empty()) enh = Enhancer::from_checkpoint(checkpoint);

    const auto records = read_manifest(manifest);
    const std::string base = fs::path(manifest).parent_path().string();
    for (const auto& rec : records) {
      if (!split.empty() && rec.split != split) continue;
      UtteranceRecord u = load_utterance(rec, base);
      if (channel >= static_cast<int>(u.noisy.size()))
        throw DataError("channel " + std::to_string(channel) +
                        " out of range for utterance " + u.utt_id);
      EvalPair p;
      p.utt_id = u.utt_id;
      p.reference = u.clean;
      p.estimate = enh ? enh->enhance(u.noisy[static_cast<size_t>(channel)])
                       : u.noisy[static_cast<size_t>(channel)];
      p.labels = u.labels;
      pairs.push_back(std::move(p));
    }
  }
  if (pairs.empty()) throw DataError("eval: no utterances matched");

  std::optional<AcousticModel> am;
  if (!am_path.empty()) {
    am = AcousticModel::from_checkpoint(am_path);
    am->freeze();
  }

  std::vector<UtteranceMetrics> metrics;
  for (const auto& p : pairs) {
    if (p.reference.samples.empty())
      throw DataError("eval: missing reference for " + p.utt_id);
    UtteranceMetrics m;
    m.utt_id = p.utt_id;
    m.si_sdr_db = si_sdr(p.estimate, p.reference);
    m.estoi = estoi(p.estimate, p.reference);
    if (am && !p.labels.empty() && have_stft) {
      const Tensor mag = magnitude(stft(p.estimate, stft_cfg)).values;
      m.frame_accuracy = frame_accuracy(am->forward_plain(mag).logits, p.labels);
    }
    metrics.push_back(std::move(m));
  }
  MetricReport report = aggregate_metrics(std::move(metrics));

  if (!st.quiet) {
    std::printf("%-24s %8s %8s\n", "utt_id", "SI-SDR", "eSTOIx100");
    for (const auto& u : report.per_utterance)
      std::printf("%-24s %8.1f %8.1f\n", u.utt_id.c_str(), u.si_sdr_db, 100.0 * u.estoi);
  }
  print_report_table(report, passthrough ? "Noisy speech" : "Enhanced");
  if (!report_path.empty()) {
    write_report_jsonl(report_path, report);
    info(st, "report: " + report_path);
  }
  return 0;
}

int cmd_compare_features(const CliState& st, const std::string& manifest,
                         const std::string& utt_id,
                         const std::vector<std::string>& sources,
                         const std::string& out_dir, int n_mels, int channel) {
  if (sources.size() < 2)
    throw ConfigError("compare-features: need at least two sources");
  const CorpusSpec corpus_spec = corpus_spec_for_manifest(manifest);
  const StftConfig& stft_cfg = corpus_spec.stft;

  const auto records = read_manifest(manifest);
  const std::string base = fs::path(manifest).parent_path().string();
  const ManifestRecord* rec = nullptr;
  for (const auto& r : records)
    if (r.utt_id == utt_id) rec = &r;
  if (!rec) throw DataError("compare-features: unknown utterance: " + utt_id);
  UtteranceRecord utt = load_utterance(*rec, base);

  std::vector<std::pair<std::string, Waveform>> waves;
  for (const auto& src : sources) {
    if (src == "clean") {
      waves.emplace_back("clean", utt.clean);
    } else if (src == "noisy") {
      if (channel >= static_cast<int>(utt.noisy.size()))
        throw DataError("compare-features: channel out of range");
      waves.emplace_back("noisy", utt.noisy[static_cast<size_t>(channel)]);
    } else if (src.rfind("enh:", 0) == 0) {
      Enhancer enh = Enhancer::from_checkpoint(src.substr(4));
      if (channel >= static_cast<int>(utt.noisy.size()))
        throw DataError("compare-features: channel out of range");
      waves.emplace_back("enhanced",
                         enh.enhance(utt.noisy[static_cast<size_t>(channel)]));
    } else {
      waves.emplace_back(fs::path(src).stem().string(), read_wav(src));
    }
  }
  for (const auto& [name, w] : waves)
    if (w.size() != waves[0].second.size())
      throw DataError("compare-features: source '" + name + "' length " +
                      std::to_string(w.size()) + " != " +
                      std::to_string(waves[0].second.size()));

  fs::create_directories(out_dir);
  const double fmax = corpus_spec.sample_rate / 2.0;
  std::vector<Tensor> panels;
  for (size_t i = 0; i < waves.size(); ++i) {
    const Tensor grid =
        log_mel(magnitude(stft(waves[i].second, stft_cfg)), n_mels, 50.0, fmax);
    const std::string grid_path =
        (fs::path(out_dir) / (utt_id + "_" + std::to_string(i) + "_" +
                              waves[i].first + ".grid"))
            .string();
    write_grid(grid_path, grid);
    info(st, "panel " + std::to_string(i) + " (" + waves[i].first +
                 "): " + grid_path);
    panels.push_back(grid);
  }
  const std::string img_path = (fs::path(out_dir) / (utt_id + "_compare.ppm")).string();
  write_panels_ppm(img_path, panels);

  for (size_t i = 1; i < panels.size(); ++i) {
    double linf = 0.0;
    for (int64_t k = 0; k < panels[i].numel(); ++k)
      linf = std::max(linf, std::abs(panels[i][k] - panels[0][k]));
    std::printf("L-inf(panel %zu, panel 0) = %.6g\n", i, linf);
  }
  std::printf("image: %s\n", img_path.c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"mimic-loss speech enhancement workbench"};
  app.require_subcommand(1);
  CliState st;
  app.add_flag("--quiet", st.quiet, "suppress informational output");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  std::string synth_spec, synth_out;
  std::optional<uint64_t> synth_seed;
  synth->add_option("--spec", synth_spec, "corpus spec JSON")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "override the spec seed");

  // train-am
  auto* tam = app.add_subcommand("train-am", "train the senone acoustic model");
  std::string tam_corpus, tam_out, tam_preset = "converged";
  uint64_t tam_seed = 0;
  double tam_scale = 1.0, tam_lr = 1e-3;
  int tam_max_epochs = 0;
  tam->add_option("--corpus", tam_corpus, "corpus manifest")->required();
  tam->add_option("--out", tam_out, "output checkpoint path")->required();
  tam->add_option("--preset", tam_preset, "light | converged")
      ->check(CLI::IsMember({"light", "converged"}));
  tam->add_option("--seed", tam_seed, "training seed")->required();
  tam->add_option("--scale", tam_scale, "channel scale multiplier");
  tam->add_option("--lr", tam_lr, "learning rate");
  tam->add_option("--max-epochs", tam_max_epochs, "cap for the converged preset");

  // train-enh
  auto* tenh = app.add_subcommand("train-enh", "train the enhancer per experiment config");
  std::string tenh_config, tenh_out;
  uint64_t tenh_seed = 0;
  tenh->add_option("--config", tenh_config, "experiment config JSON")->required();
  tenh->add_option("--out", tenh_out, "output directory")->required();
  tenh->add_option("--seed", tenh_seed, "training seed")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "score utterances (SI-SDR, eSTOI)");
  std::string ev_manifest, ev_pairs, ev_ckpt, ev_split = "test", ev_am, ev_report;
  bool ev_pass = false;
  int ev_channel = 0;
  ev->add_option("--manifest", ev_manifest, "corpus manifest");
  ev->add_option("--pairs", ev_pairs, "pairs manifest (estimate/reference records)");
  ev->add_option("--checkpoint", ev_ckpt, "enhancer checkpoint");
  ev->add_flag("--passthrough", ev_pass, "score the noisy channel directly");
  ev->add_option("--split", ev_split, "corpus split to evaluate");
  ev->add_option("--channel", ev_channel, "evaluation channel");
  ev->add_option("--am", ev_am, "acoustic model checkpoint for frame accuracy");
  ev->add_option("--out", ev_report, "write per-utterance JSONL report here");

  // compare-features
  auto* cf_cmd = app.add_subcommand("compare-features",
                                        "emit aligned log-mel feature panels");
  std::string cf_manifest, cf_utt, cf_out;
  std::vector<std::string> cf_sources;
  int cf_mels = 40, cf_channel = 0;
  cf_cmd->add_option("--manifest", cf_manifest, "corpus manifest")->required();
  cf_cmd->add_option("--utt-id", cf_utt, "utterance id")->required();
  cf_cmd->add_option("--source", cf_sources,
                         "clean | noisy | enh:<ckpt> | <wav path> (repeatable)")
      ->required();
  cf_cmd->add_option("--out", cf_out, "output directory")->required();
  cf_cmd->add_option("--n-mels", cf_mels, "mel channels");
  cf_cmd->add_option("--channel", cf_channel, "noisy channel index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(st, synth_spec, synth_out, synth_seed);
    if (tam->parsed())
      return cmd_train_am(st, tam_corpus, tam_out, tam_preset, tam_seed, tam_scale,
                          tam_lr, tam_max_epochs);
    if (tenh->parsed()) return cmd_train_enh(st, tenh_config, tenh_out, tenh_seed);
    if (ev->parsed())
      return cmd_eval(st, ev_manifest, ev_pairs, ev_ckpt, ev_pass, ev_split,
                      ev_channel, ev_am, ev_report);
    if (cf_cmd->parsed())
      return cmd_compare_features(st, cf_manifest, cf_utt, cf_sources, cf_out,
                                  cf_mels, cf_channel);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error (config): %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error (validation): %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error (data): %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error (numeric): %s\n", e.what());
    return 4;
  }
  return 2;
}

}  // namespace mimicenh
