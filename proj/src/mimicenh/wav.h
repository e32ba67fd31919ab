// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIMICENH_WAV_H_
#define MIMICENH_WAV_H_

#include <string>
#include <vector>

namespace mimicenh {

// 1-D sampled audio signal. Samples are dimensionless amplitudes with
// nominal range [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  int64_t size() const { return static_cast<int64_t>(samples.size()); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class WavEncoding { kPcm16, kFloat32 };

// Mono WAV I/O: PCM16 (format tag 1) and IEEE float32 (format tag 3).
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w,
               WavEncoding enc = WavEncoding::kFloat32);

}  // namespace mimicenh

#endif  // MIMICENH_WAV_H_
