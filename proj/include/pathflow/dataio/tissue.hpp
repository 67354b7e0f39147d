#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "pathflow/dataio/image.hpp"
#include "pathflow/errors.hpp"

namespace pathflow::dataio {

struct BoolRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;

  BoolRaster() = default;
  BoolRaster(int w, int h) : width(w), height(h), mask(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int y, int x) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int y, int x, bool v) { mask[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto b : mask) c += b;
    return c;
  }
};

// Luminance/variance heuristic for separating tissue from glass background.
// A pixel is tissue iff its local WxW window has mean luminance below
// white_thresh or luminance variance above var_thresh. Windows are clipped
// at image borders. Computed with summed-area tables.
inline BoolRaster tissue_mask(const ImageRaster& img, double white_thresh, double var_thresh,
                              int window = 16) {
  if (white_thresh <= 0.0 || white_thresh >= 1.0)
    throw ConfigError("tissue_mask: white_thresh must be in (0,1)");
  if (var_thresh < 0.0) throw ConfigError("tissue_mask: var_thresh must be >= 0");
  if (window < 1) throw ConfigError("tissue_mask: window must be >= 1");

  const int w = img.width, h = img.height;
  std::vector<double> lum(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      lum[static_cast<std::size_t>(y) * w + x] =
          (img.at(0, y, x) + img.at(1, y, x) + img.at(2, y, x)) / 3.0;

  // integral images over luminance and its square, with a zero row/column
  const int sw = w + 1;
  std::vector<double> s1(static_cast<std::size_t>(sw) * (h + 1), 0.0);
  std::vector<double> s2(static_cast<std::size_t>(sw) * (h + 1), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = lum[static_cast<std::size_t>(y) * w + x];
      const std::size_t i = static_cast<std::size_t>(y + 1) * sw + (x + 1);
      s1[i] = v + s1[i - 1] + s1[i - sw] - s1[i - sw - 1];
      s2[i] = v * v + s2[i - 1] + s2[i - sw] - s2[i - sw - 1];
    }

  auto box = [&](const std::vector<double>& s, int y0, int x0, int y1, int x1) {
    // inclusive pixel box [y0,y1] x [x0,x1]
    const std::size_t a = static_cast<std::size_t>(y1 + 1) * sw + (x1 + 1);
    const std::size_t b = static_cast<std::size_t>(y0) * sw + (x1 + 1);
    const std::size_t c = static_cast<std::size_t>(y1 + 1) * sw + x0;
    const std::size_t d = static_cast<std::size_t>(y0) * sw + x0;
    return s[a] - s[b] - s[c] + s[d];
  };

  const int lo = (window - 1) / 2;  // pixels before center
  const int hi = window / 2;        // pixels after center
  BoolRaster out(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - lo), y1 = std::min(h - 1, y + hi);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - lo), x1 = std::min(w - 1, x + hi);
      const double cnt = static_cast<double>(y1 - y0 + 1) * (x1 - x0 + 1);
      const double mean = box(s1, y0, x0, y1, x1) / cnt;
      double var = box(s2, y0, x0, y1, x1) / cnt - mean * mean;
      if (var < 0.0) var = 0.0;  // rounding guard
      out.set(y, x, mean < white_thresh || var > var_thresh);
    }
  }
  return out;
}

}  // namespace pathflow::dataio
