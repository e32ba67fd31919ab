// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIMICENH_MEL_H_
#define MIMICENH_MEL_H_

#include "mimicenh/stft.h"
#include "mimicenh/tensor.h"

namespace mimicenh {

// Triangular mel filterbank, [n_mels, fft_size/2+1]. Every row is
// nonnegative and has at least one nonzero weight.
Tensor build_mel_filterbank(int sample_rate, int fft_size, int n_mels,
                            double fmin_hz, double fmax_hz);

// log(filterbank . power + kLogEps), [T, n_mels].
Tensor log_mel(const MagnitudeSpectrogram& m, int n_mels, double fmin_hz,
               double fmax_hz);

}  // namespace mimicenh

#endif  // MIMICENH_MEL_H_
