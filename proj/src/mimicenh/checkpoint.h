// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Versioned binary checkpoint container shared by the acoustic model and
// the enhancer (distinguished by a payload type tag):
//   8-byte magic | u64 json length | json metadata | raw LE doubles.
// The metadata carries the module config, the parameter manifest
// (names + shapes in canonical order) and the fingerprint, which is
// verified on load.

#ifndef MIMICENH_CHECKPOINT_H_
#define MIMICENH_CHECKPOINT_H_

#include <string>
#include <vector>

#include <json.hpp>

#include "mimicenh/autodiff.h"
#include "mimicenh/fingerprint.h"

namespace mimicenh {

struct Checkpoint {
  std::string payload_type;  // "acoustic_model" | "enhancer"
  nlohmann::json config;
  nlohmann::json extra;  // training summary etc.; never wall-clock data
  std::vector<std::string> param_names;
  std::vector<std::vector<int64_t>> param_shapes;
  std::vector<std::vector<double>> param_data;
  std::string fingerprint;
};

void save_checkpoint(const std::string& path, const std::string& payload_type,
                     const nlohmann::json& config,
                     const std::vector<ad::Var>& params,
                     const nlohmann::json& extra = nlohmann::json::object());

// Throws DataError on missing/corrupt files (fingerprint re-verified).
Checkpoint load_checkpoint(const std::string& path);

// Copies loaded data into an existing parameter set (names and shapes
// must match exactly).
void restore_params(const Checkpoint& ckpt, const std::vector<ad::Var>& params);

}  // namespace mimicenh

#endif  // MIMICENH_CHECKPOINT_H_
