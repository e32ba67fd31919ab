// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIMICENH_FINGERPRINT_H_
#define MIMICENH_FINGERPRINT_H_

#include <string>
#include <vector>

#include "mimicenh/autodiff.h"

namespace mimicenh {

// Content hash over all parameters in registration order; equal digests
// mean bit-identical parameters.
struct WeightFingerprint {
  std::string digest;  // hex SHA-256
  bool operator==(const WeightFingerprint&) const = default;
};

class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(const void* data, size_t len);
  void update(const std::string& s);
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_file_hex(const std::string& path);

// Canonical serialization: for each parameter, name, shape, then raw
// little-endian doubles.
WeightFingerprint fingerprint_params(const std::vector<ad::Var>& params);

}  // namespace mimicenh

#endif  // MIMICENH_FINGERPRINT_H_
