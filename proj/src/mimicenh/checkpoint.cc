// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/checkpoint.h"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "mimicenh/common.h"

namespace mimicenh {
namespace {

constexpr char kMagic[8] = {'M', 'E', 'N', 'H', 'C', 'K', 'P', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const std::string& payload_type,
                     const nlohmann::json& config,
                     const std::vector<ad::Var>& params,
                     const nlohmann::json& extra) {
  nlohmann::json meta;
  meta["format_version"] = 1;
  meta["payload_type"] = payload_type;
  meta["config"] = config;
  meta["extra"] = extra;
  meta["fingerprint"] = fingerprint_params(params).digest;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& p : params) {
    manifest.push_back({{"name", p->name}, {"shape", p->value.shape()}});
  }
  meta["params"] = manifest;
  const std::string meta_str = meta.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  uint64_t len = meta_str.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  for (const auto& p : params)
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * p->value.numel()));
  if (!out) throw DataError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("corrupt checkpoint (bad magic): " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  if (!in || len > (1ull << 32)) throw DataError("corrupt checkpoint (bad header): " + path);
  std::string meta_str(len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("corrupt checkpoint (truncated metadata): " + path);

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint (metadata): " + path + ": " + e.what());
  }
  if (meta.value("format_version", 0) != 1)
    throw DataError("unsupported checkpoint version in " + path);

  Checkpoint ck;
  ck.payload_type = meta.value("payload_type", "");
  ck.config = meta.value("config", nlohmann::json::object());
  ck.extra = meta.value("extra", nlohmann::json::object());
  ck.fingerprint = meta.value("fingerprint", "");
  for (const auto& item : meta["params"]) {
    ck.param_names.push_back(item.at("name").get<std::string>());
    ck.param_shapes.push_back(item.at("shape").get<std::vector<int64_t>>());
  }
  for (size_t i = 0; i < ck.param_names.size(); ++i) {
    int64_t count = 1;
    for (int64_t d : ck.param_shapes[i]) count *= d;
    std::vector<double> data(static_cast<size_t>(count));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(sizeof(double) * count));
    if (!in) throw DataError("corrupt checkpoint (truncated tensor data): " + path);
    ck.param_data.push_back(std::move(data));
  }

  // Re-verify the digest so corruption cannot slip through.
  std::vector<ad::Var> vars;
  for (size_t i = 0; i < ck.param_names.size(); ++i) {
    Tensor t(ck.param_shapes[i]);
    std::memcpy(t.data(), ck.param_data[i].data(),
                sizeof(double) * ck.param_data[i].size());
    vars.push_back(ad::make_leaf(std::move(t), false, ck.param_names[i]));
  }
  if (fingerprint_params(vars).digest != ck.fingerprint)
    throw DataError("corrupt checkpoint (fingerprint mismatch): " + path);
  return ck;
}

void restore_params(const Checkpoint& ckpt, const std::vector<ad::Var>& params) {
  if (ckpt.param_names.size() != params.size())
    throw DataError("checkpoint parameter count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name != ckpt.param_names[i])
      throw DataError("checkpoint parameter name mismatch: expected '" +
                      params[i]->name + "', found '" + ckpt.param_names[i] + "'");
    if (params[i]->value.shape() != ckpt.param_shapes[i])
      throw DataError("checkpoint parameter shape mismatch for '" +
                      params[i]->name + "'");
    std::memcpy(params[i]->value.data(), ckpt.param_data[i].data(),
                sizeof(double) * ckpt.param_data[i].size());
  }
}

}  // namespace mimicenh
