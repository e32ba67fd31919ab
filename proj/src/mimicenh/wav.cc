// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mimicenh/common.h"

namespace mimicenh {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, uint16_t v) {
  for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t get_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const size_t n = bytes.size();
  if (n < 44 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  uint32_t data_len = 0;

  size_t off = 12;
  while (off + 8 <= n) {
    const unsigned char* hdr = p + off;
    uint32_t chunk_len = get_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (off + 8 + chunk_len > n) throw DataError("truncated wav chunk in " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw DataError("bad fmt chunk in " + path);
      format = get_u16(body);
      channels = get_u16(body + 2);
      sample_rate = get_u32(body + 4);
      bits = get_u16(body + 14);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    off += 8 + chunk_len + (chunk_len & 1);
  }
  if (!data) throw DataError("wav file has no data chunk: " + path);
  if (channels != 1) throw DataError("only mono wav supported: " + path);

  Waveform w;
  w.sample_rate = static_cast<int>(sample_rate);
  if (format == kFormatPcm && bits == 16) {
    const size_t count = data_len / 2;
    w.samples.resize(count);
    for (size_t i = 0; i < count; ++i) {
      int16_t s = static_cast<int16_t>(get_u16(data + 2 * i));
      w.samples[i] = static_cast<double>(s) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const size_t count = data_len / 4;
    w.samples.resize(count);
    for (size_t i = 0; i < count; ++i) {
      uint32_t u = get_u32(data + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      w.samples[i] = static_cast<double>(f);
    }
  } else {
    throw DataError("unsupported wav encoding (format=" + std::to_string(format) +
                    ", bits=" + std::to_string(bits) + "): " + path);
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& w, WavEncoding enc) {
  const uint16_t bits = enc == WavEncoding::kPcm16 ? 16 : 32;
  const uint16_t format = enc == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat;
  const uint32_t data_len = static_cast<uint32_t>(w.samples.size()) * (bits / 8);
  const bool with_fact = enc == WavEncoding::kFloat32;

  std::string s;
  s.reserve(64 + data_len);
  s += "RIFF";
  put_u32(s, 4 + (8 + 16) + (with_fact ? 12 : 0) + 8 + data_len);
  s += "WAVE";
  s += "fmt ";
  put_u32(s, 16);
  put_u16(s, format);
  put_u16(s, 1);  // mono
  put_u32(s, static_cast<uint32_t>(w.sample_rate));
  put_u32(s, static_cast<uint32_t>(w.sample_rate) * (bits / 8));
  put_u16(s, bits / 8);
  put_u16(s, bits);
  if (with_fact) {
    s += "fact";
    put_u32(s, 4);
    put_u32(s, static_cast<uint32_t>(w.samples.size()));
  }
  s += "data";
  put_u32(s, data_len);
  if (enc == WavEncoding::kPcm16) {
    for (double v : w.samples) {
      double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      put_u16(s, static_cast<uint16_t>(static_cast<int16_t>(scaled)));
    }
  } else {
    for (double v : w.samples) {
      float f = static_cast<float>(v);
      uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(s, u);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write wav file: " + path);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw DataError("short write on wav file: " + path);
}

}  // namespace mimicenh
