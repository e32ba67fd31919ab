// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Loss algebra: local time/spectral L1 mapping losses, hard-target mimic
// (cross-entropy against senone alignments), soft mimic (L1/L2 on
// pre-softmax logits of a frozen teacher), a temperature-scaled
// distillation variant, and their weighted combination.

#ifndef MIMICENH_LOSSES_H_
#define MIMICENH_LOSSES_H_

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimicenh/autodiff.h"
#include "mimicenh/stft.h"
#include "mimicenh/tensor.h"
#include "mimicenh/wav.h"

namespace mimicenh {

enum class MimicKind { kNone, kHardCe, kSoftL1, kSoftL2, kKd };

std::string mimic_kind_name(MimicKind k);
MimicKind mimic_kind_from_name(const std::string& s);

struct LossConfig {
  bool use_time_l1 = false;
  bool use_specmag_l1 = false;
  MimicKind mimic = MimicKind::kNone;
  double kd_temperature = 1.0;
  double w_time = 1.0;
  double w_spec = 1.0;
  double w_mimic = 1.0;

  void validate() const;  // at least one enabled loss, sane weights
};

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

// All components already weight-multiplied; disabled terms are 0.
struct LossBreakdown {
  double total = 0.0;
  double time_l1 = 0.0;
  double spec_l1 = 0.0;
  double mimic = 0.0;
};

// ---- autodiff building blocks (scalar outputs) ----

// mean |x - target| over all elements; no gradient into target.
ad::Var l1_mean_to_const(const ad::Var& x, const Tensor& target);
// mean (x - target)^2.
ad::Var l2_mean_to_const(const ad::Var& x, const Tensor& target);
// mean over frames of -log softmax(logits)[label]; log-sum-exp stabilized,
// softmax never materialized.
ad::Var cross_entropy_mean(const ad::Var& logits, const std::vector<int>& labels);
// T^2-scaled cross-entropy between tempered teacher softmax (constant)
// and tempered student softmax, mean over frames.
ad::Var kd_to_const(const ad::Var& logits, const Tensor& teacher_logits,
                    double temperature);

// ---- spec-level operations ----

ad::Var loss_time_l1(const ad::Var& denoised, const Tensor& clean);
ad::Var loss_specmag_l1(const ad::Var& denoised, const Waveform& clean,
                        const StftConfig& cfg);
ad::Var loss_mimic_hard(const ad::Var& logits, const std::vector<int>& labels);
ad::Var loss_mimic_soft(const ad::Var& logits_denoised, const Tensor& logits_clean,
                        MimicKind kind);
ad::Var loss_kd(const ad::Var& logits_denoised, const Tensor& logits_clean,
                double temperature);

// Plain-value counterparts used by evaluation and tests.
double loss_time_l1(const Waveform& denoised, const Waveform& clean);
double loss_specmag_l1(const Waveform& denoised, const Waveform& clean,
                       const StftConfig& cfg);
double loss_mimic_hard(const Tensor& logits, const std::vector<int>& labels);
double loss_mimic_soft(const Tensor& logits_denoised, const Tensor& logits_clean,
                       MimicKind kind);
double loss_kd(const Tensor& logits_denoised, const Tensor& logits_clean,
               double temperature);

// total = w_time*time + w_spec*spec + w_mimic*mimic over the enabled terms.
LossBreakdown combine(std::optional<double> time_raw, std::optional<double> spec_raw,
                      std::optional<double> mimic_raw, const LossConfig& cfg);

// Row-wise stable softmax (materialized posteriors, diagnostics only).
Tensor softmax_rows(const Tensor& logits);

}  // namespace mimicenh

#endif  // MIMICENH_LOSSES_H_
