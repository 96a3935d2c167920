// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bird's-eye-view density images.
//
// The ground window [-C, C] x [-C, C] is split into D x D cells of side g with
// D = ceil(2C / g). Cell (0, 0) sits at (x = -C, y = +C); u grows with +x and
// v grows with -y. Intensities are per-cell point counts clipped at the 99th
// percentile of the occupied-cell counts and scaled into [0, 1].

#ifndef BVMATCH_BVIMAGE_HPP_
#define BVMATCH_BVIMAGE_HPP_

#include <cstdint>
#include <filesystem>

#include "bvmatch/common.hpp"
#include "bvmatch/pointcloud.hpp"

namespace bvmatch {

/// Metric geometry of a BV raster.
struct BvGeometry {
  double cell = 0.4;          // g, meters per cell
  double half_extent = 50.0;  // C, meters

  int side() const;  // D = ceil(2C / g)

  /// Continuous pixel coordinates of a metric point (cell centers at +0.5).
  double u_of(double x) const { return (x + half_extent) / cell; }
  double v_of(double y) const { return (half_extent - y) / cell; }
  double x_of(double u) const { return u * cell - half_extent; }
  double y_of(double v) const { return half_extent - v * cell; }

  /// Continuous pixel coordinate of the metric origin (same on both axes).
  double origin() const { return half_extent / cell; }
};

struct DensityGrid {
  BvGeometry geometry;
  Grid<std::uint32_t> counts;
};

struct BvImage {
  BvGeometry geometry;
  Grid<double> intensity;

  int side() const { return intensity.width(); }
};

/// Counts points per (x, y) cell; points outside the window are ignored and
/// points on the +C edge land in the last cell.
DensityGrid density_grid(const PointCloud& cloud, double cell, double half_extent);

/// Nearest-rank 99th percentile over the counts of occupied cells.
/// Throws Error("empty BV window") if no cell is occupied.
std::uint32_t percentile99(const DensityGrid& grid);

BvImage normalize_density(const DensityGrid& grid);

/// density_grid followed by normalize_density.
BvImage build_bv_image(const PointCloud& cloud, double cell, double half_extent);

/// Crops, voxel-filters with the cell size and builds the image.
BvImage make_bv_image(const PointCloud& raw, double cell, double half_extent);

/// 8-bit binary PGM (P5), value = floor(255 * intensity + 0.5).
void render_pgm(const Grid<double>& values, const std::filesystem::path& path);
void render_pgm(const BvImage& image, const std::filesystem::path& path);

/// Row-major CSV with 6 significant digits.
void write_csv(const BvImage& image, const std::filesystem::path& path);

}  // namespace bvmatch

#endif  // BVMATCH_BVIMAGE_HPP_
