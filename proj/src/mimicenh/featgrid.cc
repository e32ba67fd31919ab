// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/featgrid.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mimicenh/common.h"

namespace mimicenh {

void write_grid(const std::string& path, const Tensor& grid) {
  if (grid.ndim() != 2) throw ValidationError("write_grid: expects 2-D tensor");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write grid: " + path);
  out << grid.dim(0) << ' ' << grid.dim(1) << '\n';
  char buf[40];
  for (int64_t r = 0; r < grid.dim(0); ++r) {
    for (int64_t c = 0; c < grid.dim(1); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", grid.at2(r, c));
      out << buf << (c + 1 == grid.dim(1) ? '\n' : '\t');
    }
  }
  if (!out) throw DataError("short write on grid: " + path);
}

Tensor read_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid: " + path);
  int64_t rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 1 || cols < 1)
    throw DataError("malformed grid header in " + path);
  Tensor t({rows, cols});
  for (int64_t i = 0; i < rows * cols; ++i)
    if (!(in >> t[i])) throw DataError("truncated grid data in " + path);
  return t;
}

namespace {

// Small dark-to-bright colormap, linear between anchor colors.
void colormap(double v, unsigned char* rgb) {
  static const double anchors[5][3] = {{0.05, 0.03, 0.25},
                                       {0.23, 0.10, 0.45},
                                       {0.75, 0.20, 0.35},
                                       {0.98, 0.55, 0.15},
                                       {0.99, 0.95, 0.65}};
  v = std::clamp(v, 0.0, 1.0);
  const double x = v * 4.0;
  const int i = std::min(3, static_cast<int>(x));
  const double f = x - i;
  for (int c = 0; c < 3; ++c) {
    const double val = anchors[i][c] + f * (anchors[i + 1][c] - anchors[i][c]);
    rgb[c] = static_cast<unsigned char>(std::lround(255.0 * std::clamp(val, 0.0, 1.0)));
  }
}

}  // namespace

void write_panels_ppm(const std::string& path, const std::vector<Tensor>& panels) {
  if (panels.empty()) throw ValidationError("write_panels_ppm: no panels");
  for (const auto& p : panels)
    if (p.ndim() != 2) throw ValidationError("write_panels_ppm: panels must be 2-D");

  constexpr int kZoom = 3;
  constexpr int kGap = 4;
  int64_t width = 0;
  int64_t height = 0;
  for (const auto& p : panels) {
    width = std::max(width, p.dim(0) * kZoom);
    height += p.dim(1) * kZoom + kGap;
  }
  height -= kGap;

  std::vector<unsigned char> img(static_cast<size_t>(3 * width * height), 255);
  int64_t y_off = 0;
  for (const auto& p : panels) {
    double lo = p[0], hi = p[0];
    for (int64_t i = 0; i < p.numel(); ++i) {
      lo = std::min(lo, p[i]);
      hi = std::max(hi, p[i]);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    const int64_t frames = p.dim(0), chans = p.dim(1);
    for (int64_t t = 0; t < frames; ++t)
      for (int64_t c = 0; c < chans; ++c) {
        unsigned char rgb[3];
        colormap((p.at2(t, c) - lo) / span, rgb);
        // channel 0 at the bottom of the panel
        const int64_t px = t * kZoom;
        const int64_t py = y_off + (chans - 1 - c) * kZoom;
        for (int dy = 0; dy < kZoom; ++dy)
          for (int dx = 0; dx < kZoom; ++dx) {
            const int64_t idx = 3 * ((py + dy) * width + px + dx);
            img[static_cast<size_t>(idx)] = rgb[0];
            img[static_cast<size_t>(idx) + 1] = rgb[1];
            img[static_cast<size_t>(idx) + 2] = rgb[2];
          }
      }
    y_off += chans * kZoom + kGap;
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write image: " + path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()),
            static_cast<std::streamsize>(img.size()));
  if (!out) throw DataError("short write on image: " + path);
}

}  // namespace mimicenh
