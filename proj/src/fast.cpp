// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>

#include "bvmatch/bvft.hpp"

namespace bvmatch {
namespace {

// Bresenham circle of radius 3, clockwise from the top.
constexpr std::array<std::array<int, 2>, 16> kCircle = {{{0, -3}, {1, -3}, {2, -2}, {3, -1},
                                                         {3, 0},  {3, 1},  {2, 2},  {1, 3},
                                                         {0, 3},  {-1, 3}, {-2, 2}, {-3, 1},
                                                         {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}}};
constexpr int kArc = 9;

// Longest circular run of set flags.
int longest_run(const std::array<bool, 16>& flags) {
  int best = 0;
  int run = 0;
  for (int i = 0; i < 32; ++i) {
    if (flags[static_cast<std::size_t>(i % 16)]) {
      best = std::max(best, ++run);
    } else {
      run = 0;
    }
  }
  return std::min(best, 16);
}

}  // namespace

bool patch_fits(int width, int height, int u, int v, int patch_size) {
  const int lo = patch_size / 2;
  const int hi = patch_size - 1 - lo;
  return u - lo >= 0 && v - lo >= 0 && u + hi < width && v + hi < height;
}

double fast_score(const Grid<double>& image, int u, int v, double threshold) {
  if (u < 3 || v < 3 || u + 3 >= image.width() || v + 3 >= image.height()) return 0.0;
  const double center = image(u, v);
  std::array<bool, 16> brighter{};
  std::array<bool, 16> darker{};
  double bright_sum = 0.0;
  double dark_sum = 0.0;
  for (std::size_t k = 0; k < kCircle.size(); ++k) {
    const double value = image(u + kCircle[k][0], v + kCircle[k][1]);
    if (value > center + threshold) {
      brighter[k] = true;
      bright_sum += value - center - threshold;
    } else if (value < center - threshold) {
      darker[k] = true;
      dark_sum += center - value - threshold;
    }
  }
  const bool bright_corner = longest_run(brighter) >= kArc;
  const bool dark_corner = longest_run(darker) >= kArc;
  if (!bright_corner && !dark_corner) return 0.0;
  return std::max(bright_corner ? bright_sum : 0.0, dark_corner ? dark_sum : 0.0);
}

std::vector<Keypoint> detect_fast(const Grid<double>& image, double threshold, int max_keypoints,
                                  int patch_size) {
  const int w = image.width();
  const int h = image.height();
  Grid<double> score(w, h, 0.0);
  for (int v = 3; v + 3 < h; ++v) {
    for (int u = 3; u + 3 < w; ++u) score(u, v) = fast_score(image, u, v, threshold);
  }

  std::vector<Keypoint> kept;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double s = score(u, v);
      if (s <= 0.0 || !patch_fits(w, h, u, v, patch_size)) continue;
      // Strict maximum, except that an equal neighbour later in raster order
      // loses to this pixel.
      bool is_max = true;
      for (int dv = -1; dv <= 1 && is_max; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          if ((du == 0 && dv == 0) || !score.contains(u + du, v + dv)) continue;
          const double n = score(u + du, v + dv);
          const bool earlier = dv < 0 || (dv == 0 && du < 0);
          if (n > s || (n == s && earlier)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) kept.push_back({u, v, s});
    }
  }

  std::stable_sort(kept.begin(), kept.end(),
                   [](const Keypoint& a, const Keypoint& b) { return a.score > b.score; });
  if (max_keypoints >= 0 && kept.size() > static_cast<std::size_t>(max_keypoints)) {
    kept.resize(static_cast<std::size_t>(max_keypoints));
  }
  return kept;
}

}  // namespace bvmatch
