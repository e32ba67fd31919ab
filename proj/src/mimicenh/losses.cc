// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/losses.h"

#include <cmath>
#include <memory>

#include "mimicenh/common.h"

namespace mimicenh {
namespace {

using ad::Node;
using ad::Var;

void check_shape_match(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw ValidationError(std::string(what) + ": shape mismatch " + a.shape_str() +
                          " vs " + b.shape_str());
}

// log(sum_s exp(z_s - m)) + m for one row.
double lse_row(const double* z, int64_t s, double* max_out = nullptr) {
  double m = z[0];
  for (int64_t i = 1; i < s; ++i) m = std::max(m, z[i]);
  double acc = 0.0;
  for (int64_t i = 0; i < s; ++i) acc += std::exp(z[i] - m);
  if (max_out) *max_out = m;
  return std::log(acc) + m;
}

}  // namespace

std::string mimic_kind_name(MimicKind k) {
  switch (k) {
    case MimicKind::kNone: return "none";
    case MimicKind::kHardCe: return "hard_ce";
    case MimicKind::kSoftL1: return "soft_l1";
    case MimicKind::kSoftL2: return "soft_l2";
    case MimicKind::kKd: return "kd";
  }
  return "none";
}

MimicKind mimic_kind_from_name(const std::string& s) {
  if (s == "none") return MimicKind::kNone;
  if (s == "hard_ce") return MimicKind::kHardCe;
  if (s == "soft_l1") return MimicKind::kSoftL1;
  if (s == "soft_l2") return MimicKind::kSoftL2;
  if (s == "kd") return MimicKind::kKd;
  throw ConfigError("unknown mimic loss kind: " + s);
}

void LossConfig::validate() const {
  if (!use_time_l1 && !use_specmag_l1 && mimic == MimicKind::kNone)
    throw ConfigError("loss config enables no loss term");
  if (w_time < 0 || w_spec < 0 || w_mimic < 0)
    throw ConfigError("loss weights must be nonnegative");
  if (mimic == MimicKind::kKd && kd_temperature <= 0)
    throw ConfigError("kd temperature must be positive");
}

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"use_time_l1", c.use_time_l1},
                     {"use_specmag_l1", c.use_specmag_l1},
                     {"mimic", mimic_kind_name(c.mimic)},
                     {"kd_temperature", c.kd_temperature},
                     {"weights", {c.w_time, c.w_spec, c.w_mimic}}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  c.use_time_l1 = j.value("use_time_l1", false);
  c.use_specmag_l1 = j.value("use_specmag_l1", false);
  c.mimic = mimic_kind_from_name(j.value("mimic", "none"));
  c.kd_temperature = j.value("kd_temperature", 1.0);
  if (j.contains("weights")) {
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != 3) throw ConfigError("loss weights must have 3 entries");
    c.w_time = w[0];
    c.w_spec = w[1];
    c.w_mimic = w[2];
  }
}

// ------------------------------------------------------------- primitives

ad::Var l1_mean_to_const(const Var& x, const Tensor& target) {
  check_shape_match(x->value, target, "l1 loss");
  const int64_t n = x->value.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += std::abs(x->value[i] - target[i]);
  auto node = std::make_shared<Node>();
  node->value = Tensor::scalar(acc / static_cast<double>(n));
  node->requires_grad = x->requires_grad;
  if (node->requires_grad) {
    node->parents = {x};
    node->backward_fn = [x, target, n](Node& out) {
      x->ensure_grad();
      const double g = out.grad[0] / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i) {
        const double d = x->value[i] - target[i];
        x->grad[i] += g * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
      }
    };
  }
  return node;
}

ad::Var l2_mean_to_const(const Var& x, const Tensor& target) {
  check_shape_match(x->value, target, "l2 loss");
  const int64_t n = x->value.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = x->value[i] - target[i];
    acc += d * d;
  }
  auto node = std::make_shared<Node>();
  node->value = Tensor::scalar(acc / static_cast<double>(n));
  node->requires_grad = x->requires_grad;
  if (node->requires_grad) {
    node->parents = {x};
    node->backward_fn = [x, target, n](Node& out) {
      x->ensure_grad();
      const double g = out.grad[0] / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i)
        x->grad[i] += g * 2.0 * (x->value[i] - target[i]);
    };
  }
  return node;
}

ad::Var cross_entropy_mean(const Var& logits, const std::vector<int>& labels) {
  const Tensor& z = logits->value;
  if (z.ndim() != 2) throw ValidationError("cross_entropy: logits must be [T,S]");
  const int64_t t_count = z.dim(0), s_count = z.dim(1);
  if (static_cast<int64_t>(labels.size()) != t_count)
    throw ValidationError("cross_entropy: frame count mismatch (" +
                          std::to_string(t_count) + " logits vs " +
                          std::to_string(labels.size()) + " labels)");
  for (int v : labels)
    if (v < 0 || v >= s_count)
      throw ValidationError("cross_entropy: label out of range: " + std::to_string(v));

  double acc = 0.0;
  for (int64_t t = 0; t < t_count; ++t) {
    const double* row = z.data() + t * s_count;
    acc += lse_row(row, s_count) - row[labels[static_cast<size_t>(t)]];
  }
  auto node = std::make_shared<Node>();
  node->value = Tensor::scalar(acc / static_cast<double>(t_count));
  node->requires_grad = logits->requires_grad;
  if (node->requires_grad) {
    node->parents = {logits};
    node->backward_fn = [logits, labels, t_count, s_count](Node& out) {
      logits->ensure_grad();
      const double g = out.grad[0] / static_cast<double>(t_count);
      std::vector<double> p(static_cast<size_t>(s_count));
      for (int64_t t = 0; t < t_count; ++t) {
        const double* row = logits->value.data() + t * s_count;
        double m;
        const double lse = lse_row(row, s_count, &m);
        (void)m;
        for (int64_t s = 0; s < s_count; ++s)
          p[static_cast<size_t>(s)] = std::exp(row[s] - lse);
        double* grow = logits->grad.data() + t * s_count;
        for (int64_t s = 0; s < s_count; ++s) grow[s] += g * p[static_cast<size_t>(s)];
        grow[labels[static_cast<size_t>(t)]] -= g;
      }
    };
  }
  return node;
}

ad::Var kd_to_const(const Var& logits, const Tensor& teacher_logits,
                    double temperature) {
  if (temperature <= 0) throw ConfigError("kd: temperature must be positive");
  check_shape_match(logits->value, teacher_logits, "kd loss");
  const int64_t t_count = logits->value.dim(0), s_count = logits->value.dim(1);

  // Tempered teacher posteriors (constant w.r.t. the graph).
  auto teacher = std::make_shared<Tensor>(Tensor({t_count, s_count}));
  for (int64_t t = 0; t < t_count; ++t) {
    std::vector<double> row(static_cast<size_t>(s_count));
    for (int64_t s = 0; s < s_count; ++s)
      row[static_cast<size_t>(s)] = teacher_logits.at2(t, s) / temperature;
    const double lse = lse_row(row.data(), s_count);
    for (int64_t s = 0; s < s_count; ++s)
      teacher->at2(t, s) = std::exp(row[static_cast<size_t>(s)] - lse);
  }

  double acc = 0.0;
  for (int64_t t = 0; t < t_count; ++t) {
    std::vector<double> u(static_cast<size_t>(s_count));
    for (int64_t s = 0; s < s_count; ++s)
      u[static_cast<size_t>(s)] = logits->value.at2(t, s) / temperature;
    const double lse = lse_row(u.data(), s_count);
    double ce = lse;
    for (int64_t s = 0; s < s_count; ++s)
      ce -= teacher->at2(t, s) * u[static_cast<size_t>(s)];
    acc += ce;
  }
  const double scale = temperature * temperature / static_cast<double>(t_count);

  auto node = std::make_shared<Node>();
  node->value = Tensor::scalar(acc * scale);
  node->requires_grad = logits->requires_grad;
  if (node->requires_grad) {
    node->parents = {logits};
    node->backward_fn = [logits, teacher, temperature, t_count, s_count](Node& out) {
      logits->ensure_grad();
      const double g = out.grad[0] * temperature / static_cast<double>(t_count);
      std::vector<double> u(static_cast<size_t>(s_count));
      for (int64_t t = 0; t < t_count; ++t) {
        for (int64_t s = 0; s < s_count; ++s)
          u[static_cast<size_t>(s)] = logits->value.at2(t, s) / temperature;
        const double lse = lse_row(u.data(), s_count);
        double* grow = logits->grad.data() + t * s_count;
        for (int64_t s = 0; s < s_count; ++s) {
          const double ps = std::exp(u[static_cast<size_t>(s)] - lse);
          grow[s] += g * (ps - teacher->at2(t, s));
        }
      }
    };
  }
  return node;
}

// --------------------------------------------------------- spec operations

ad::Var loss_time_l1(const Var& denoised, const Tensor& clean) {
  return l1_mean_to_const(denoised, clean);
}

ad::Var loss_specmag_l1(const Var& denoised, const Waveform& clean,
                        const StftConfig& cfg) {
  if (denoised->value.numel() != clean.size())
    throw ValidationError("specmag loss: length mismatch");
  const Tensor clean_mag = magnitude(stft(clean, cfg)).values;
  auto spec = stft_op(denoised, cfg);
  auto mag = magnitude_op(spec);
  return l1_mean_to_const(mag, clean_mag);
}

ad::Var loss_mimic_hard(const Var& logits, const std::vector<int>& labels) {
  return cross_entropy_mean(logits, labels);
}

ad::Var loss_mimic_soft(const Var& logits_denoised, const Tensor& logits_clean,
                        MimicKind kind) {
  if (kind == MimicKind::kSoftL1) return l1_mean_to_const(logits_denoised, logits_clean);
  if (kind == MimicKind::kSoftL2) return l2_mean_to_const(logits_denoised, logits_clean);
  throw ConfigError("loss_mimic_soft: kind must be soft_l1 or soft_l2");
}

ad::Var loss_kd(const Var& logits_denoised, const Tensor& logits_clean,
                double temperature) {
  return kd_to_const(logits_denoised, logits_clean, temperature);
}

// ----------------------------------------------------- plain-value mirrors

namespace {
Var as_const_1d(const Waveform& w) {
  return ad::constant(Tensor::from_vector(w.samples));
}
}  // namespace

double loss_time_l1(const Waveform& denoised, const Waveform& clean) {
  if (denoised.size() != clean.size())
    throw ValidationError("time L1: length mismatch");
  return loss_time_l1(as_const_1d(denoised), Tensor::from_vector(clean.samples))
      ->value[0];
}

double loss_specmag_l1(const Waveform& denoised, const Waveform& clean,
                       const StftConfig& cfg) {
  if (denoised.size() != clean.size())
    throw ValidationError("specmag L1: length mismatch");
  return loss_specmag_l1(as_const_1d(denoised), clean, cfg)->value[0];
}

double loss_mimic_hard(const Tensor& logits, const std::vector<int>& labels) {
  return loss_mimic_hard(ad::constant(logits), labels)->value[0];
}

double loss_mimic_soft(const Tensor& logits_denoised, const Tensor& logits_clean,
                       MimicKind kind) {
  return loss_mimic_soft(ad::constant(logits_denoised), logits_clean, kind)->value[0];
}

double loss_kd(const Tensor& logits_denoised, const Tensor& logits_clean,
               double temperature) {
  return loss_kd(ad::constant(logits_denoised), logits_clean, temperature)->value[0];
}

LossBreakdown combine(std::optional<double> time_raw, std::optional<double> spec_raw,
                      std::optional<double> mimic_raw, const LossConfig& cfg) {
  cfg.validate();
  if (cfg.w_time == 0 && cfg.w_spec == 0 && cfg.w_mimic == 0)
    throw ConfigError("combine: all loss weights are zero");
  LossBreakdown b;
  if (cfg.use_time_l1) {
    if (!time_raw) throw ValidationError("combine: time term enabled but missing");
    b.time_l1 = cfg.w_time * *time_raw;
  }
  if (cfg.use_specmag_l1) {
    if (!spec_raw) throw ValidationError("combine: spec term enabled but missing");
    b.spec_l1 = cfg.w_spec * *spec_raw;
  }
  if (cfg.mimic != MimicKind::kNone) {
    if (!mimic_raw) throw ValidationError("combine: mimic term enabled but missing");
    b.mimic = cfg.w_mimic * *mimic_raw;
  }
  b.total = b.time_l1 + b.spec_l1 + b.mimic;
  return b;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2) throw ValidationError("softmax_rows: expects [T,S]");
  const int64_t t_count = logits.dim(0), s_count = logits.dim(1);
  Tensor out({t_count, s_count});
  for (int64_t t = 0; t < t_count; ++t) {
    const double* row = logits.data() + t * s_count;
    const double lse = lse_row(row, s_count);
    for (int64_t s = 0; s < s_count; ++s) out.at2(t, s) = std::exp(row[s] - lse);
  }
  return out;
}

}  // namespace mimicenh
