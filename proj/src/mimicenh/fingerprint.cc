// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/fingerprint.h"

#include <openssl/evp.h>

#include <cstdint>
#include <fstream>

#include "mimicenh/common.h"

namespace mimicenh {

Sha256::Sha256() {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  ctx_ = ctx;
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(const void* data, size_t len) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, len);
}

void Sha256::update(const std::string& s) { update(s.data(), s.size()); }

std::string Sha256::hex_digest() {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out, &len);
  static const char* hex = "0123456789abcdef";
  std::string s;
  s.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    s.push_back(hex[out[i] >> 4]);
    s.push_back(hex[out[i] & 0xf]);
  }
  return s;
}

std::string sha256_hex(const void* data, size_t len) {
  Sha256 h;
  h.update(data, len);
  return h.hex_digest();
}

std::string sha256_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for hashing: " + path);
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update(buf, static_cast<size_t>(in.gcount()));
  }
  return h.hex_digest();
}

WeightFingerprint fingerprint_params(const std::vector<ad::Var>& params) {
  Sha256 h;
  for (const auto& p : params) {
    h.update(p->name);
    h.update("|", 1);
    for (int64_t d : p->value.shape()) {
      uint64_t u = static_cast<uint64_t>(d);
      h.update(&u, sizeof(u));
    }
    h.update(p->value.data(), sizeof(double) * static_cast<size_t>(p->value.numel()));
  }
  return WeightFingerprint{h.hex_digest()};
}

}  // namespace mimicenh
