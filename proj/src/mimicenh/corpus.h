// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Synthetic desk-scale corpus with exact senone labels, plus ingestion of
// external WAV+alignment corpora. Each senone is a fixed two-formant
// harmonic prototype, so labels are known exactly and the classification
// task is separable by construction.

#ifndef MIMICENH_CORPUS_H_
#define MIMICENH_CORPUS_H_

#include <string>
#include <vector>

#include <json.hpp>

#include "mimicenh/stft.h"
#include "mimicenh/wav.h"

namespace mimicenh {

struct CorpusSpec {
  int n_utterances = 200;
  int n_senones = 12;
  int sample_rate = 16000;
  double utt_len_min_s = 0.5;
  double utt_len_max_s = 0.8;
  int n_channels = 2;
  double snr_min_db = -3.0;
  double snr_max_db = 6.0;
  std::vector<std::string> noise_kinds = {"white", "pink", "babble"};
  uint64_t seed = 0;
  double train_frac = 0.7;
  double val_frac = 0.15;  // remainder is the test split
  StftConfig stft;         // shared framing that label lengths follow

  void validate() const;
};

void to_json(nlohmann::json& j, const CorpusSpec& c);
void from_json(const nlohmann::json& j, CorpusSpec& c);

struct ManifestRecord {
  std::string utt_id;
  std::string split;
  std::string clean_path;
  std::vector<std::string> noisy_paths;
  std::string labels_path;
  std::vector<double> snr_db;
};

struct UtteranceRecord {
  std::string utt_id;
  std::string split;
  Waveform clean;
  std::vector<Waveform> noisy;  // one per channel
  std::vector<int> labels;
  std::vector<double> snr_db;
};

// Scales noise so the clean/noise power ratio equals snr_db exactly, then
// returns clean + scaled noise. Longer noise is cropped at noise_offset.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                    int64_t noise_offset = 0);

struct SynthResult {
  std::string manifest_path;
  std::vector<ManifestRecord> records;
};

// Deterministic function of the spec; cleans up partial outputs on failure.
SynthResult synth_corpus(const CorpusSpec& spec, const std::string& out_dir);

std::vector<ManifestRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

// Loads one utterance; paths in the record are resolved against base_dir.
UtteranceRecord load_utterance(const ManifestRecord& rec, const std::string& base_dir);

struct IngestReport {
  std::vector<UtteranceRecord> accepted;
  struct Rejection {
    std::string utt_id;
    std::string reason;
  };
  std::vector<Rejection> rejections;
};

// Per-utterance validation (files readable, channel lengths equal, label
// length matches the frame count under cfg). Bad utterances are rejected
// and listed; the rest load normally.
IngestReport ingest_external(const std::string& manifest_path, const StftConfig& cfg);

// Test-signal helper: multi-segment harmonic "speech-like" waveform.
Waveform synth_speech_like(int sample_rate, double seconds, uint64_t seed);

}  // namespace mimicenh

#endif  // MIMICENH_CORPUS_H_
