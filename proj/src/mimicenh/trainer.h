// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Experiment orchestration: the non-parallel (hard-target) and parallel
// (local-loss / soft-mimic / joint) training regimes over a corpus, with
// per-step loss telemetry, per-epoch validation metrics, teacher
// fingerprint tracking and end-to-end gradient checking.

#ifndef MIMICENH_TRAINER_H_
#define MIMICENH_TRAINER_H_

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimicenh/acoustic_model.h"
#include "mimicenh/corpus.h"
#include "mimicenh/enhancer.h"
#include "mimicenh/losses.h"
#include "mimicenh/metrics.h"

namespace mimicenh {

enum class TrainMode {
  kNonparallelMimic,
  kNonparallelJoint,
  kParallelT,
  kParallelTSm,
  kParallelTSmMimic,
  kParallelJoint,
};

std::string train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& s);

struct OptimizerConfig {
  std::string name = "adam";
  double learning_rate = 2e-4;
  int batch_size = 4;
  int epochs = 12;
  uint64_t seed = 0;
};

struct DataConfig {
  std::string manifest;
  std::string train_split = "train";
  std::string val_split = "val";
  std::string test_split = "test";
};

struct ExperimentConfig {
  int version = 1;
  TrainMode mode = TrainMode::kParallelT;
  std::string am_checkpoint;
  bool am_frozen = true;  // must be false exactly for the *_joint modes
  LossConfig loss;
  OptimizerConfig optimizer;
  DataConfig data;
  int eval_channel = 0;
  EnhancerConfig enhancer;
  StftConfig stft;

  // Mode-legality: every illegal (mode, loss, frozen-flag) combination is
  // rejected here, before any compute.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_experiment_config(const std::string& path);

struct StepRecord {
  int64_t step = 0;
  int epoch = 0;
  LossBreakdown loss;
};

struct EpochRecord {
  int epoch = 0;
  double val_si_sdr = 0.0;
  double val_estoi = 0.0;
  std::optional<double> val_frame_accuracy;
  std::string am_fingerprint;
  std::string enh_fingerprint;
  std::string checkpoint_path;
  double wall_clock_s = 0.0;
};

struct TrainingLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

struct RunResult {
  TrainingLog log;
  std::string final_checkpoint;
  std::string log_path;
  WeightFingerprint enhancer_fingerprint;
  bool am_fingerprint_constant = true;  // meaningful for frozen runs
  MetricReport final_val_report;
};

// Runs one experiment; checkpoints and the line-delimited training log
// are written under out_dir. Deterministic given the config seed.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

// Uniform channel choice keyed by (seed, epoch, utt_id): reproducible,
// independent across utterances and epochs.
int sample_channel(const UtteranceRecord& utt, int epoch, uint64_t seed);

// Loads an acoustic model checkpoint with the frozen flag cleared so an
// optimizer may register its parameters.
AcousticModel joint_init_from_clean(const std::string& am_checkpoint);

struct GradCheckEntry {
  std::string param_path;
  int64_t flat_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::string graph;
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool passed = false;
  bool am_grads_absent = true;  // frozen teacher received no parameter grads
};

// Finite-difference check of d(loss)/d(enhancer params) on a tiny-scale
// end-to-end graph. graph is one of: time_l1, specmag_l1, mimic_hard,
// mimic_soft_l1, mimic_soft_l2, kd.
GradCheckReport gradcheck(const std::string& graph, int n_params, uint64_t seed);

}  // namespace mimicenh

#endif  // MIMICENH_TRAINER_H_
