// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Numeric feature grids (bit-exact text round trip) and a stacked
// multi-panel heatmap rendering for side-by-side feature comparison.

#ifndef MIMICENH_FEATGRID_H_
#define MIMICENH_FEATGRID_H_

#include <string>
#include <vector>

#include "mimicenh/tensor.h"

namespace mimicenh {

// Text grid: "rows cols" header line, then one row per line with
// %.17g-formatted values (round-trips IEEE doubles exactly).
void write_grid(const std::string& path, const Tensor& grid);
Tensor read_grid(const std::string& path);

// Binary PPM with one heatmap panel per tensor ([frames, channels]),
// stacked top to bottom, each panel normalized to its own range.
void write_panels_ppm(const std::string& path, const std::vector<Tensor>& panels);

}  // namespace mimicenh

#endif  // MIMICENH_FEATGRID_H_
