// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Time-domain denoising autoencoder: strided 1-D conv encoder, mirrored
// transposed-conv decoder with skip connections between mirrored layers,
// leaky ReLU activations, linear output layer. Same-length output for
// any input length via internal padding and overlap-add chunking.

#ifndef MIMICENH_ENHANCER_H_
#define MIMICENH_ENHANCER_H_

#include <string>
#include <vector>

#include <json.hpp>

#include "mimicenh/autodiff.h"
#include "mimicenh/fingerprint.h"
#include "mimicenh/nn.h"
#include "mimicenh/wav.h"

namespace mimicenh {

struct EnhancerConfig {
  int depth = 8;  // encoder layers; decoder mirrors them
  int base_channels = 64;
  int channel_cap = 512;
  int kernel = 11;
  int stride = 2;
  bool skip_connections = true;
  double leaky_slope = 0.3;
  int chunk_length = 16384;
  double scale = 1.0;

  void validate() const;
  int channels(int layer) const;     // scaled, doubling, capped
  int64_t length_multiple() const;   // stride^depth
};

void to_json(nlohmann::json& j, const EnhancerConfig& c);
void from_json(const nlohmann::json& j, EnhancerConfig& c);

class Enhancer {
 public:
  static Enhancer init(const EnhancerConfig& cfg, uint64_t seed);
  static Enhancer from_checkpoint(const std::string& path);

  const EnhancerConfig& config() const { return cfg_; }

  // x: [1, L] with L a multiple of length_multiple(). Training path.
  ad::Var forward(const ad::Var& x) const;

  // Full-length inference: any input length >= 1; long inputs are
  // processed in overlapping chunks cross-faded back together.
  Waveform enhance(const Waveform& noisy) const;

  const std::vector<ad::Var>& params() const { return store_.params(); }
  int64_t param_count() const { return store_.total_size(); }
  WeightFingerprint fingerprint() const { return fingerprint_params(store_.params()); }
  void save(const std::string& path,
            const nlohmann::json& extra = nlohmann::json::object()) const;

 private:
  Enhancer() = default;
  void build_params(Rng& rng);

  EnhancerConfig cfg_;
  ParamStore store_;
  struct ConvP {
    ad::Var w, b;
  };
  std::vector<ConvP> enc_;
  std::vector<ConvP> dec_;  // dec_[j] inverts enc_[j]
};

// Reproducible initialization (spec-level name).
inline Enhancer init_enhancer(const EnhancerConfig& cfg, uint64_t seed) {
  return Enhancer::init(cfg, seed);
}

}  // namespace mimicenh

#endif  // MIMICENH_ENHANCER_H_
