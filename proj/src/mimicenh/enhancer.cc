// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/enhancer.h"

#include <algorithm>
#include <cmath>

#include "mimicenh/checkpoint.h"
#include "mimicenh/common.h"

namespace mimicenh {

void EnhancerConfig::validate() const {
  if (depth < 1) throw ConfigError("enhancer: depth must be >= 1");
  if (base_channels < 1) throw ConfigError("enhancer: base_channels must be >= 1");
  if (channel_cap < base_channels)
    throw ConfigError("enhancer: channel_cap must be >= base_channels");
  if (kernel < 1) throw ConfigError("enhancer: kernel must be >= 1");
  if (stride < 1) throw ConfigError("enhancer: stride must be >= 1");
  if (stride > kernel)
    throw ConfigError("enhancer: stride (" + std::to_string(stride) +
                      ") must not exceed kernel (" + std::to_string(kernel) + ")");
  if (stride != 1 && stride != 2)
    throw ConfigError("enhancer: only strides 1 and 2 are supported");
  if (kernel % 2 == 0) throw ConfigError("enhancer: kernel must be odd");
  if (leaky_slope < 0.0) throw ConfigError("enhancer: negative leaky slope");
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("enhancer: scale must be in (0, 1]");
  if (chunk_length < length_multiple() || chunk_length % length_multiple() != 0)
    throw ConfigError("enhancer: chunk_length must be a positive multiple of " +
                      std::to_string(length_multiple()));
}

int EnhancerConfig::channels(int layer) const {
  int64_t c = base_channels;
  for (int i = 0; i < layer; ++i) c = std::min<int64_t>(c * 2, channel_cap);
  return std::max<int>(1, static_cast<int>(std::llround(static_cast<double>(c) * scale)));
}

int64_t EnhancerConfig::length_multiple() const {
  int64_t m = 1;
  for (int i = 0; i < depth; ++i) m *= stride;
  return m;
}

void to_json(nlohmann::json& j, const EnhancerConfig& c) {
  j = nlohmann::json{{"depth", c.depth},
                     {"base_channels", c.base_channels},
                     {"channel_cap", c.channel_cap},
                     {"kernel", c.kernel},
                     {"stride", c.stride},
                     {"skip_connections", c.skip_connections},
                     {"leaky_slope", c.leaky_slope},
                     {"chunk_length", c.chunk_length},
                     {"scale", c.scale}};
}

void from_json(const nlohmann::json& j, EnhancerConfig& c) {
  c.depth = j.value("depth", 8);
  c.base_channels = j.value("base_channels", 64);
  c.channel_cap = j.value("channel_cap", 512);
  c.kernel = j.value("kernel", 11);
  c.stride = j.value("stride", 2);
  c.skip_connections = j.value("skip_connections", true);
  c.leaky_slope = j.value("leaky_slope", 0.3);
  c.chunk_length = j.value("chunk_length", 16384);
  c.scale = j.value("scale", 1.0);
}

void Enhancer::build_params(Rng& rng) {
  const double gain = leaky_relu_gain(cfg_.leaky_slope);
  for (int i = 0; i < cfg_.depth; ++i) {
    const int cin = i == 0 ? 1 : cfg_.channels(i - 1);
    const int cout = cfg_.channels(i);
    ConvP p;
    p.w = store_.create("enc" + std::to_string(i) + ".w",
                        init_uniform_fanin(rng, {cout, cin, cfg_.kernel},
                                           static_cast<int64_t>(cin) * cfg_.kernel, gain));
    p.b = store_.create("enc" + std::to_string(i) + ".b", Tensor({cout}));
    enc_.push_back(p);
  }
  for (int i = 0; i < cfg_.depth; ++i) {
    const int cin = cfg_.channels(i);                 // dec_[i] inverts enc_[i]
    const int cout = i == 0 ? 1 : cfg_.channels(i - 1);
    ConvP p;
    p.w = store_.create("dec" + std::to_string(i) + ".w",
                        init_uniform_fanin(rng, {cin, cout, cfg_.kernel},
                                           static_cast<int64_t>(cin) * cfg_.kernel, gain));
    p.b = store_.create("dec" + std::to_string(i) + ".b", Tensor({cout}));
    dec_.push_back(p);
  }
}

Enhancer Enhancer::init(const EnhancerConfig& cfg, uint64_t seed) {
  cfg.validate();
  Enhancer e;
  e.cfg_ = cfg;
  Rng rng(mix_seed(seed, "enhancer_init"));
  e.build_params(rng);
  return e;
}

Enhancer Enhancer::from_checkpoint(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.payload_type != "enhancer")
    throw DataError("checkpoint is not an enhancer: " + path);
  EnhancerConfig cfg = ck.config.get<EnhancerConfig>();
  Enhancer e = Enhancer::init(cfg, 0);
  restore_params(ck, e.store_.params());
  return e;
}

ad::Var Enhancer::forward(const ad::Var& x) const {
  if (x->value.ndim() != 2 || x->value.dim(0) != 1)
    throw ValidationError("enhancer forward: expects [1, L]");
  if (x->value.dim(1) % cfg_.length_multiple() != 0)
    throw ValidationError("enhancer forward: length must be a multiple of " +
                          std::to_string(cfg_.length_multiple()));
  const int pad = cfg_.kernel / 2;
  const int out_pad = cfg_.stride - 1;

  std::vector<ad::Var> skips;
  ad::Var h = x;
  for (int i = 0; i < cfg_.depth; ++i) {
    h = ad::leaky_relu(conv1d(h, enc_[static_cast<size_t>(i)].w,
                              enc_[static_cast<size_t>(i)].b, cfg_.stride, pad),
                       cfg_.leaky_slope);
    skips.push_back(h);
  }
  ad::Var d = skips.back();
  for (int i = cfg_.depth - 1; i >= 1; --i) {
    ad::Var u = conv_transpose1d(d, dec_[static_cast<size_t>(i)].w,
                                 dec_[static_cast<size_t>(i)].b, cfg_.stride, pad, out_pad);
    if (cfg_.skip_connections) u = ad::add(u, skips[static_cast<size_t>(i - 1)]);
    d = ad::leaky_relu(u, cfg_.leaky_slope);
  }
  // Output layer stays linear so samples can take either sign.
  return conv_transpose1d(d, dec_[0].w, dec_[0].b, cfg_.stride, pad, out_pad);
}

namespace {

Tensor padded_row(const std::vector<double>& samples, int64_t begin, int64_t len) {
  Tensor t({1, len});
  const int64_t n = static_cast<int64_t>(samples.size());
  for (int64_t i = 0; i < len; ++i) {
    const int64_t j = begin + i;
    t[i] = (j >= 0 && j < n) ? samples[static_cast<size_t>(j)] : 0.0;
  }
  return t;
}

}  // namespace

Waveform Enhancer::enhance(const Waveform& noisy) const {
  if (noisy.samples.empty()) throw ValidationError("enhance: empty input");
  for (double v : noisy.samples)
    if (!std::isfinite(v)) throw ValidationError("enhance: non-finite sample");

  const int64_t len = noisy.size();
  const int64_t mult = cfg_.length_multiple();
  Waveform out;
  out.sample_rate = noisy.sample_rate;
  out.samples.assign(static_cast<size_t>(len), 0.0);

  if (len <= cfg_.chunk_length) {
    const int64_t padded = ((len + mult - 1) / mult) * mult;
    ad::Var y = forward(ad::constant(padded_row(noisy.samples, 0, padded)));
    for (int64_t i = 0; i < len; ++i) out.samples[static_cast<size_t>(i)] = y->value[i];
    return out;
  }

  // Overlap-add chunking: 25% overlap, triangular cross-fade, weight-sum
  // normalized so irregular final chunks stay seamless.
  const int64_t chunk = cfg_.chunk_length;
  const int64_t overlap = chunk / 4;
  const int64_t hop = chunk - overlap;
  std::vector<int64_t> starts;
  for (int64_t s = 0; s + chunk < len; s += hop) starts.push_back(s);
  starts.push_back(len - chunk);

  std::vector<double> wsum(static_cast<size_t>(len), 0.0);
  for (size_t c = 0; c < starts.size(); ++c) {
    const int64_t s = starts[c];
    ad::Var y = forward(ad::constant(padded_row(noisy.samples, s, chunk)));
    for (int64_t i = 0; i < chunk; ++i) {
      double w = 1.0;
      if (c != 0 && i < overlap)
        w = std::min(w, static_cast<double>(i + 1) / static_cast<double>(overlap + 1));
      if (c + 1 != starts.size() && i >= chunk - overlap)
        w = std::min(w, static_cast<double>(chunk - i) / static_cast<double>(overlap + 1));
      const int64_t j = s + i;
      out.samples[static_cast<size_t>(j)] += w * y->value[i];
      wsum[static_cast<size_t>(j)] += w;
    }
  }
  for (int64_t i = 0; i < len; ++i) {
    const double ws = wsum[static_cast<size_t>(i)];
    if (ws > 1e-12) out.samples[static_cast<size_t>(i)] /= ws;
  }
  return out;
}

void Enhancer::save(const std::string& path, const nlohmann::json& extra) const {
  save_checkpoint(path, "enhancer", nlohmann::json(cfg_), store_.params(), extra);
}

}  // namespace mimicenh
