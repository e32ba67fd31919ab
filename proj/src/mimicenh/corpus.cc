// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/corpus.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mimicenh/common.h"
#include "mimicenh/acoustic_model.h"
#include "mimicenh/fft.h"
#include "mimicenh/rng.h"
#include "mimicenh/threading.h"

namespace fs = std::filesystem;

namespace mimicenh {
namespace {

constexpr double kCleanRms = 0.08;
constexpr int kSegMinFrames = 5;
constexpr int kSegMaxFrames = 30;
constexpr double kFormantLowHz = 300.0;
constexpr double kFormantHighHz = 3400.0;

// Senone prototype: two formant centers, log-spaced over the speech band
// so prototypes stay spectrally separated.
struct SenoneProto {
  double f1, f2, bw1, bw2;
};

SenoneProto senone_proto(int senone, int n_senones) {
  SenoneProto p;
  const double t = n_senones > 1 ? static_cast<double>(senone) / (n_senones - 1) : 0.0;
  p.f1 = kFormantLowHz * std::pow(kFormantHighHz / kFormantLowHz, t);
  p.f2 = std::min(p.f1 * 2.1, 4400.0);
  p.bw1 = 90.0 + 20.0 * (senone % 3);
  p.bw2 = 140.0;
  return p;
}

double proto_envelope(const SenoneProto& p, double hz) {
  const double d1 = (hz - p.f1) / p.bw1;
  const double d2 = (hz - p.f2) / p.bw2;
  return std::exp(-d1 * d1) + 0.6 * std::exp(-d2 * d2);
}

// Renders one senone segment: harmonics of f0 weighted by the prototype
// envelope, random per-segment phases, short raised-cosine edges.
void render_segment(std::vector<double>& out, int64_t begin, int64_t end,
                    const SenoneProto& proto, double f0, int sample_rate, Rng& rng) {
  const int n_harm = static_cast<int>(4500.0 / f0);
  std::vector<double> amp(static_cast<size_t>(n_harm) + 1, 0.0);
  std::vector<double> phase(static_cast<size_t>(n_harm) + 1, 0.0);
  for (int h = 1; h <= n_harm; ++h) {
    amp[static_cast<size_t>(h)] = proto_envelope(proto, h * f0);
    phase[static_cast<size_t>(h)] = rng.uniform(0.0, 2.0 * M_PI);
  }
  const int64_t fade = std::min<int64_t>((end - begin) / 4, sample_rate * 4 / 1000);
  for (int64_t n = begin; n < end; ++n) {
    double v = 0.0;
    const double t = static_cast<double>(n - begin) / sample_rate;
    for (int h = 1; h <= n_harm; ++h)
      v += amp[static_cast<size_t>(h)] *
           std::sin(2.0 * M_PI * h * f0 * t + phase[static_cast<size_t>(h)]);
    double env = 1.0;
    if (fade > 0) {
      const int64_t from_start = n - begin;
      const int64_t from_end = end - 1 - n;
      if (from_start < fade)
        env *= 0.5 - 0.5 * std::cos(M_PI * (from_start + 1) / (fade + 1));
      if (from_end < fade)
        env *= 0.5 - 0.5 * std::cos(M_PI * (from_end + 1) / (fade + 1));
    }
    out[static_cast<size_t>(n)] = env * v;
  }
}

std::vector<double> make_noise(const std::string& kind, int64_t n, int sample_rate,
                               Rng& rng) {
  std::vector<double> x(static_cast<size_t>(n));
  rng.fill_normal(x.data(), n, 1.0);
  if (kind == "white") return x;

  // Pink: shape the white spectrum by 1/sqrt(f).
  int64_t m = 1;
  while (m < n) m <<= 1;
  std::vector<double> padded(static_cast<size_t>(m), 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  auto half = rfft(padded, static_cast<int>(m));
  half[0] = 0.0;
  for (size_t k = 1; k < half.size(); ++k)
    half[k] /= std::sqrt(static_cast<double>(k));
  auto shaped = irfft(half, static_cast<int>(m));
  std::copy(shaped.begin(), shaped.begin() + n, x.begin());
  if (kind == "pink") return x;

  if (kind == "babble") {
    // Syllabic-rate amplitude modulation on the pink base.
    const double r1 = rng.uniform(2.0, 5.0), r2 = rng.uniform(3.0, 6.0);
    const double p1 = rng.uniform(0.0, 2.0 * M_PI), p2 = rng.uniform(0.0, 2.0 * M_PI);
    for (int64_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      const double env = 0.35 + 0.65 * 0.5 *
                                    (1.0 + 0.6 * std::sin(2.0 * M_PI * r1 * t + p1) +
                                     0.4 * std::sin(2.0 * M_PI * r2 * t + p2));
      x[static_cast<size_t>(i)] *= std::max(env, 0.05);
    }
    return x;
  }
  throw ConfigError("unknown noise kind: " + kind);
}

struct BuiltUtterance {
  Waveform clean;
  std::vector<int> labels;
};

BuiltUtterance build_clean_utterance(const CorpusSpec& spec, uint64_t utt_seed) {
  Rng rng(utt_seed);
  const double secs = rng.uniform(spec.utt_len_min_s, spec.utt_len_max_s);
  const int64_t hop = spec.stft.hop_length;
  int64_t n = static_cast<int64_t>(secs * spec.sample_rate);
  n = std::max<int64_t>(n, spec.stft.frame_length);
  const int64_t n_frames = stft_frame_count(n, spec.stft);

  BuiltUtterance u;
  u.clean.sample_rate = spec.sample_rate;
  u.clean.samples.assign(static_cast<size_t>(n), 0.0);
  u.labels.resize(static_cast<size_t>(n_frames));

  const double f0 = rng.uniform(95.0, 155.0);
  int64_t frame = 0;
  while (frame < n_frames) {
    const int senone = static_cast<int>(rng.uniform_int(spec.n_senones));
    const int64_t seg_frames = std::min<int64_t>(
        kSegMinFrames + rng.uniform_int(kSegMaxFrames - kSegMinFrames + 1),
        n_frames - frame);
    for (int64_t t = frame; t < frame + seg_frames; ++t)
      u.labels[static_cast<size_t>(t)] = senone;
    const int64_t s_begin = std::min<int64_t>(frame * hop, n);
    const int64_t s_end = std::min<int64_t>((frame + seg_frames) * hop, n);
    if (s_begin < s_end)
      render_segment(u.clean.samples, s_begin, s_end,
                     senone_proto(senone, spec.n_senones), f0, spec.sample_rate, rng);
    frame += seg_frames;
  }
  // Samples past the last full frame keep the final senone's sound.
  const int64_t tail_begin = std::min<int64_t>(n_frames * hop, n);
  if (tail_begin < n)
    render_segment(u.clean.samples, tail_begin, n,
                   senone_proto(u.labels.back(), spec.n_senones), f0,
                   spec.sample_rate, rng);

  double power = 0.0;
  for (double v : u.clean.samples) power += v * v;
  power /= static_cast<double>(n);
  const double gain = power > 0 ? kCleanRms / std::sqrt(power) : 1.0;
  for (double& v : u.clean.samples) v *= gain;
  return u;
}

}  // namespace

void CorpusSpec::validate() const {
  if (n_utterances < 1) throw ConfigError("corpus: n_utterances must be >= 1");
  if (n_senones < 2) throw ConfigError("corpus: n_senones must be >= 2");
  if (sample_rate < 8000) throw ConfigError("corpus: sample_rate must be >= 8000");
  if (!(utt_len_min_s > 0 && utt_len_min_s <= utt_len_max_s))
    throw ConfigError("corpus: bad utterance length range");
  if (n_channels < 1) throw ConfigError("corpus: n_channels must be >= 1");
  if (!(std::isfinite(snr_min_db) && std::isfinite(snr_max_db) && snr_min_db <= snr_max_db))
    throw ConfigError("corpus: snr range must be finite and ordered");
  if (noise_kinds.empty()) throw ConfigError("corpus: at least one noise kind");
  for (const auto& k : noise_kinds)
    if (k != "white" && k != "pink" && k != "babble")
      throw ConfigError("corpus: unknown noise kind: " + k);
  if (!(train_frac > 0 && val_frac >= 0 && train_frac + val_frac < 1.0))
    throw ConfigError("corpus: bad split fractions");
  stft.validate();
}

void to_json(nlohmann::json& j, const CorpusSpec& c) {
  j = nlohmann::json{{"n_utterances", c.n_utterances},
                     {"n_senones", c.n_senones},
                     {"sample_rate", c.sample_rate},
                     {"utt_len_range_s", {c.utt_len_min_s, c.utt_len_max_s}},
                     {"n_channels", c.n_channels},
                     {"snr_range_db", {c.snr_min_db, c.snr_max_db}},
                     {"noise_kinds", c.noise_kinds},
                     {"seed", c.seed},
                     {"train_frac", c.train_frac},
                     {"val_frac", c.val_frac},
                     {"stft",
                      {{"frame_length", c.stft.frame_length},
                       {"hop_length", c.stft.hop_length},
                       {"fft_size", c.stft.fft_size},
                       {"window", c.stft.window == WindowKind::kHann    ? "hann"
                                  : c.stft.window == WindowKind::kHamming ? "hamming"
                                                                          : "rect"}}}};
}

void from_json(const nlohmann::json& j, CorpusSpec& c) {
  c.n_utterances = j.value("n_utterances", 200);
  c.n_senones = j.value("n_senones", 12);
  c.sample_rate = j.value("sample_rate", 16000);
  if (j.contains("utt_len_range_s")) {
    auto r = j.at("utt_len_range_s").get<std::vector<double>>();
    if (r.size() != 2) throw ConfigError("corpus: utt_len_range_s needs 2 entries");
    c.utt_len_min_s = r[0];
    c.utt_len_max_s = r[1];
  }
  c.n_channels = j.value("n_channels", 2);
  if (j.contains("snr_range_db")) {
    auto r = j.at("snr_range_db").get<std::vector<double>>();
    if (r.size() != 2) throw ConfigError("corpus: snr_range_db needs 2 entries");
    c.snr_min_db = r[0];
    c.snr_max_db = r[1];
  }
  c.noise_kinds = j.value("noise_kinds", std::vector<std::string>{"white", "pink", "babble"});
  c.seed = j.value("seed", static_cast<uint64_t>(0));
  c.train_frac = j.value("train_frac", 0.7);
  c.val_frac = j.value("val_frac", 0.15);
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
      throw ConfigError("corpus: unknown window: " + w);
  }
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                    int64_t noise_offset) {
  if (!std::isfinite(snr_db)) throw ValidationError("mix_at_snr: snr must be finite");
  if (noise.size() < clean.size())
    throw ValidationError("mix_at_snr: noise shorter than clean signal");
  if (noise_offset < 0 || noise_offset + clean.size() > noise.size())
    throw ValidationError("mix_at_snr: bad noise offset");

  const int64_t n = clean.size();
  double p_clean = 0.0, p_noise = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    p_clean += clean.samples[static_cast<size_t>(i)] * clean.samples[static_cast<size_t>(i)];
    const double v = noise.samples[static_cast<size_t>(i + noise_offset)];
    p_noise += v * v;
  }
  if (p_clean <= 0.0) throw ValidationError("mix_at_snr: clean signal has zero power");
  if (p_noise <= 0.0) throw ValidationError("mix_at_snr: noise has zero power");

  const double gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Waveform out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    out.samples[static_cast<size_t>(i)] =
        clean.samples[static_cast<size_t>(i)] +
        gain * noise.samples[static_cast<size_t>(i + noise_offset)];
  return out;
}

SynthResult synth_corpus(const CorpusSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::vector<std::vector<std::string>> files(static_cast<size_t>(spec.n_utterances));
  try {
    fs::create_directories(fs::path(out_dir) / "audio");
    fs::create_directories(fs::path(out_dir) / "labels");

    const int n_train = static_cast<int>(std::lround(spec.train_frac * spec.n_utterances));
    const int n_val = static_cast<int>(std::lround(spec.val_frac * spec.n_utterances));

    std::vector<ManifestRecord> records(static_cast<size_t>(spec.n_utterances));

    parallel_for(spec.n_utterances, [&](int64_t u) {
      char id[32];
      std::snprintf(id, sizeof(id), "utt_%04d", static_cast<int>(u));
      const uint64_t utt_seed = mix_seed(spec.seed, mix_seed(static_cast<uint64_t>(u), "utt"));
      BuiltUtterance built = build_clean_utterance(spec, utt_seed);

      ManifestRecord rec;
      rec.utt_id = id;
      rec.split = u < n_train ? "train" : (u < n_train + n_val ? "val" : "test");

      const std::string clean_rel = std::string("audio/") + id + "_clean.wav";
      write_wav((fs::path(out_dir) / clean_rel).string(), built.clean);
      files[static_cast<size_t>(u)].push_back(clean_rel);
      rec.clean_path = clean_rel;

      for (int ch = 0; ch < spec.n_channels; ++ch) {
        Rng ch_rng(mix_seed(utt_seed, mix_seed(static_cast<uint64_t>(ch), "chan")));
        const std::string kind =
            spec.noise_kinds[static_cast<size_t>(ch_rng.uniform_int(
                static_cast<int64_t>(spec.noise_kinds.size())))];
        const int64_t margin = 4096;
        Waveform noise;
        noise.sample_rate = spec.sample_rate;
        noise.samples = make_noise(kind, built.clean.size() + margin, spec.sample_rate, ch_rng);
        const int64_t offset = ch_rng.uniform_int(margin + 1);
        const double snr = ch_rng.uniform(spec.snr_min_db, spec.snr_max_db);
        Waveform noisy = mix_at_snr(built.clean, noise, snr, offset);

        const std::string noisy_rel =
            std::string("audio/") + id + "_noisy_ch" + std::to_string(ch) + ".wav";
        write_wav((fs::path(out_dir) / noisy_rel).string(), noisy);
        files[static_cast<size_t>(u)].push_back(noisy_rel);
        rec.noisy_paths.push_back(noisy_rel);
        rec.snr_db.push_back(snr);
      }

      const std::string labels_rel = std::string("labels/") + id + ".align";
      write_alignment_file((fs::path(out_dir) / labels_rel).string(),
                           {{id, built.labels}});
      files[static_cast<size_t>(u)].push_back(labels_rel);
      rec.labels_path = labels_rel;
      records[static_cast<size_t>(u)] = std::move(rec);
    });

    const std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
    write_manifest(manifest_path, records);
    nlohmann::json spec_echo = spec;
    std::ofstream spec_out((fs::path(out_dir) / "corpus_spec.json").string(),
                           std::ios::trunc);
    spec_out << spec_echo.dump(2) << "\n";
    return SynthResult{manifest_path, std::move(records)};
  } catch (...) {
    // Remove partial outputs so a failed run leaves nothing behind.
    for (const auto& fl : files)
      for (const auto& f : fl) {
        std::error_code ec;
        fs::remove(fs::path(out_dir) / f, ec);
      }
    throw;
  }
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest: " + path);
  for (const auto& r : records) {
    nlohmann::json j{{"utt_id", r.utt_id},
                     {"split", r.split},
                     {"clean_path", r.clean_path},
                     {"noisy_paths", r.noisy_paths},
                     {"labels_path", r.labels_path},
                     {"snr_db", r.snr_db}};
    out << j.dump() << "\n";
  }
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  std::vector<ManifestRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed manifest line " + std::to_string(line_no) + " in " +
                      path + ": " + e.what());
    }
    ManifestRecord r;
    r.utt_id = j.value("utt_id", "");
    r.split = j.value("split", "");
    r.clean_path = j.value("clean_path", "");
    r.noisy_paths = j.value("noisy_paths", std::vector<std::string>{});
    r.labels_path = j.value("labels_path", "");
    r.snr_db = j.value("snr_db", std::vector<double>{});
    records.push_back(std::move(r));
  }
  return records;
}

UtteranceRecord load_utterance(const ManifestRecord& rec, const std::string& base_dir) {
  UtteranceRecord u;
  u.utt_id = rec.utt_id;
  u.split = rec.split;
  u.snr_db = rec.snr_db;
  u.clean = read_wav((fs::path(base_dir) / rec.clean_path).string());
  for (const auto& p : rec.noisy_paths)
    u.noisy.push_back(read_wav((fs::path(base_dir) / p).string()));
  if (!rec.labels_path.empty()) {
    const auto aligns =
        read_alignment_file((fs::path(base_dir) / rec.labels_path).string());
    for (const auto& a : aligns)
      if (a.utt_id == rec.utt_id) {
        u.labels = a.senone_ids;
        break;
      }
    if (u.labels.empty())
      throw DataError("no alignment for '" + rec.utt_id + "' in " + rec.labels_path);
  }
  return u;
}

IngestReport ingest_external(const std::string& manifest_path, const StftConfig& cfg) {
  const auto records = read_manifest(manifest_path);
  const std::string base_dir = fs::path(manifest_path).parent_path().string();
  IngestReport report;
  for (const auto& rec : records) {
    try {
      UtteranceRecord u = load_utterance(rec, base_dir);
      for (size_t ch = 0; ch < u.noisy.size(); ++ch) {
        if (u.noisy[ch].size() != u.clean.size())
          throw DataError("channel " + std::to_string(ch) + " length " +
                          std::to_string(u.noisy[ch].size()) + " != clean length " +
                          std::to_string(u.clean.size()));
        if (u.noisy[ch].sample_rate != u.clean.sample_rate)
          throw DataError("channel " + std::to_string(ch) + " sample rate mismatch");
      }
      const int64_t expect = stft_frame_count(u.clean.size(), cfg);
      if (!u.labels.empty() &&
          static_cast<int64_t>(u.labels.size()) != expect)
        throw DataError("label length " + std::to_string(u.labels.size()) +
                        " != frame count " + std::to_string(expect));
      report.accepted.push_back(std::move(u));
    } catch (const std::exception& e) {
      report.rejections.push_back({rec.utt_id, e.what()});
    }
  }
  return report;
}

Waveform synth_speech_like(int sample_rate, double seconds, uint64_t seed) {
  CorpusSpec spec;
  spec.sample_rate = sample_rate;
  spec.utt_len_min_s = seconds;
  spec.utt_len_max_s = seconds;
  spec.seed = seed;
  BuiltUtterance u = build_clean_utterance(spec, mix_seed(seed, "speech_like"));
  return u.clean;
}

}  // namespace mimicenh
