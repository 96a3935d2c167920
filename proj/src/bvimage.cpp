// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "bvmatch/bvimage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

namespace bvmatch {

int BvGeometry::side() const {
  // Guard against 2C/g landing a hair above an integer.
  return static_cast<int>(std::ceil(2.0 * half_extent / cell - 1e-9));
}

DensityGrid density_grid(const PointCloud& cloud, double cell, double half_extent) {
  if (!(cell > 0.0) || !(half_extent > 0.0)) throw Error("BV cell size and window must be positive");
  DensityGrid grid;
  grid.geometry = {cell, half_extent};
  const int d = grid.geometry.side();
  grid.counts = Grid<std::uint32_t>(d, d, 0);
  for (const auto& p : cloud.points) {
    if (std::abs(p.x) > half_extent || std::abs(p.y) > half_extent) continue;
    const int u = std::clamp(static_cast<int>(std::floor(grid.geometry.u_of(p.x))), 0, d - 1);
    const int v = std::clamp(static_cast<int>(std::floor(grid.geometry.v_of(p.y))), 0, d - 1);
    ++grid.counts(u, v);
  }
  return grid;
}

std::uint32_t percentile99(const DensityGrid& grid) {
  std::vector<std::uint32_t> occupied;
  for (auto c : grid.counts.data()) {
    if (c > 0) occupied.push_back(c);
  }
  if (occupied.empty()) throw Error("empty BV window");
  // Nearest rank: the ceil(0.99 n)-th smallest value.
  const auto n = occupied.size();
  const auto rank = (99 * n + 99) / 100;
  const auto k = std::clamp<std::size_t>(rank, 1, n) - 1;
  std::nth_element(occupied.begin(), occupied.begin() + static_cast<std::ptrdiff_t>(k), occupied.end());
  return occupied[k];
}

BvImage normalize_density(const DensityGrid& grid) {
  const double nm = static_cast<double>(percentile99(grid));
  BvImage image;
  image.geometry = grid.geometry;
  image.intensity = Grid<double>(grid.counts.width(), grid.counts.height(), 0.0);
  auto& out = image.intensity.data();
  const auto& in = grid.counts.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::min(static_cast<double>(in[i]), nm) / nm;
  }
  return image;
}

BvImage build_bv_image(const PointCloud& cloud, double cell, double half_extent) {
  return normalize_density(density_grid(cloud, cell, half_extent));
}

BvImage make_bv_image(const PointCloud& raw, double cell, double half_extent) {
  return build_bv_image(voxel_filter(crop_window(raw, half_extent), cell), cell, half_extent);
}

void render_pgm(const Grid<double>& values, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << values.width() << ' ' << values.height() << "\n255\n";
  std::vector<unsigned char> bytes(values.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double scaled = std::floor(255.0 * std::clamp(values.data()[i], 0.0, 1.0) + 0.5);
    bytes[i] = static_cast<unsigned char>(scaled);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

void render_pgm(const BvImage& image, const std::filesystem::path& path) {
  render_pgm(image.intensity, path);
}

void write_csv(const BvImage& image, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  char buf[32];
  for (int v = 0; v < image.intensity.height(); ++v) {
    for (int u = 0; u < image.intensity.width(); ++u) {
      std::snprintf(buf, sizeof(buf), "%.6g", image.intensity(u, v));
      if (u > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace bvmatch
