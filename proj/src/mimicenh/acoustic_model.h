// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Frame-synchronous senone classifier over spectral magnitudes. The
// network downsamples time by 2 per block; after the conv stack the
// frequency axis is mean-pooled, the channels are divided into n_split
// groups, each group maps to senone logits through its own affine layer,
// and the groups are interleaved back along time, so the output frame
// count always equals the input frame count.

#ifndef MIMICENH_ACOUSTIC_MODEL_H_
#define MIMICENH_ACOUSTIC_MODEL_H_

#include <string>
#include <vector>

#include <json.hpp>

#include "mimicenh/autodiff.h"
#include "mimicenh/fingerprint.h"
#include "mimicenh/nn.h"
#include "mimicenh/stft.h"

namespace mimicenh {

struct AmConfig {
  int n_blocks = 4;
  int layers_per_block = 3;
  std::vector<int> block_channels = {128, 256, 512, 1024};
  int n_split = 16;  // must equal 2^n_blocks
  int n_senones = 12;
  int input_bins = 257;
  double scale = 1.0;  // channel multiplier for desk-scale runs
  std::string feature_norm = "utt_meanvar";

  void validate() const;
  int scaled_channels(int block) const;
};

void to_json(nlohmann::json& j, const AmConfig& c);
void from_json(const nlohmann::json& j, AmConfig& c);

// Pre-softmax frame logits.
struct SenonePosteriorgram {
  Tensor logits;  // [T, n_senones]
};

struct AlignmentLabels {
  std::vector<int> senone_ids;
};

// Text alignment records: "utt_id n_frames id id id ..." per line.
struct AlignmentRecord {
  std::string utt_id;
  std::vector<int> senone_ids;
};
std::vector<AlignmentRecord> read_alignment_file(const std::string& path);
void write_alignment_file(const std::string& path,
                          const std::vector<AlignmentRecord>& records);

class AcousticModel {
 public:
  static AcousticModel init(const AmConfig& cfg, uint64_t seed);
  static AcousticModel from_checkpoint(const std::string& path);

  const AmConfig& config() const { return cfg_; }

  // mag: [T, input_bins] -> logits [T, n_senones]. Input features are
  // standardized per utterance (differentiably) before the conv stack.
  ad::Var forward(const ad::Var& mag) const;
  SenonePosteriorgram forward_plain(const Tensor& mag) const;

  // Frozen: parameter updates rejected, gradients still flow to inputs.
  void freeze();
  void unfreeze();
  bool frozen() const { return frozen_; }

  const std::vector<ad::Var>& params() const { return store_.params(); }
  int64_t param_count() const { return store_.total_size(); }
  WeightFingerprint fingerprint() const { return fingerprint_params(store_.params()); }
  void save(const std::string& path,
            const nlohmann::json& extra = nlohmann::json::object()) const;

 private:
  AcousticModel() = default;
  void build_params(Rng& rng);

  AmConfig cfg_;
  ParamStore store_;
  bool frozen_ = false;

  struct ConvP {
    ad::Var w, b;
  };
  // [block][layer]; layer 0 strides 2 in time, with a 1x1 projection.
  std::vector<std::vector<ConvP>> blocks_;
  std::vector<ConvP> projections_;
  std::vector<ConvP> head_;  // n_split affine groups
};

// Wrapper matching the operation-level contract (bin check included).
SenonePosteriorgram am_forward(const MagnitudeSpectrogram& m,
                               const AcousticModel& model);

struct AmExample {
  std::string utt_id;
  Tensor mag;  // [T, input_bins]
  std::vector<int> labels;
};

struct AmTrainConfig {
  std::string preset = "converged";  // "light" | "converged"
  int light_epochs = 5;
  int max_epochs = 40;
  int patience = 5;  // converged preset: early stop on validation CE
  double learning_rate = 1e-3;
  int batch_size = 4;
  uint64_t seed = 0;
};

struct AmEpochStats {
  int epoch = 0;
  double train_ce = 0.0;
  double val_ce = 0.0;
  double val_accuracy = 0.0;
};

struct AmTrainResult {
  std::vector<AmEpochStats> curve;
  int epochs_run = 0;
};

// Cross-entropy training against hard senone targets. Utterances whose
// label length does not match their frame count are reported together in
// a DataError before any compute.
AmTrainResult train_am(AcousticModel& model, const std::vector<AmExample>& train,
                       const std::vector<AmExample>& val, const AmTrainConfig& cfg);

}  // namespace mimicenh

#endif  // MIMICENH_ACOUSTIC_MODEL_H_
