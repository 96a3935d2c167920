// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Point cloud model, file I/O, voxel-grid downsampling, window cropping and
// planar (x, y, yaw) transforms. Frames follow the usual road-scene
// convention: x to the right, y forward, z up.

#ifndef BVMATCH_POINTCLOUD_HPP_
#define BVMATCH_POINTCLOUD_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bvmatch {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Point3&) const = default;
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

/// Planar rigid motion: rotate by theta about z, then translate by (tx, ty).
struct Pose2D {
  double tx = 0.0;
  double ty = 0.0;
  double theta = 0.0;

  Pose2D() = default;
  Pose2D(double tx_, double ty_, double theta_)
      : tx(tx_), ty(ty_), theta(normalize_angle(theta_)) {}

  static Pose2D identity() { return {}; }

  Pose2D inverse() const;

  /// (*this * rhs)(p) == (*this)(rhs(p)).
  Pose2D operator*(const Pose2D& rhs) const;

  Point3 apply(const Point3& p) const;

  double translation_norm() const;

  bool operator==(const Pose2D&) const = default;
};

struct PointCloud {
  std::vector<Point3> points;
  std::string frame_id;
  std::optional<Pose2D> pose;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class CloudFormat { kXyzAscii, kXyzBinary };

/// Parses "xyz-ascii" / "xyz-bin".
CloudFormat parse_cloud_format(std::string_view name);

/// Picks the format from the extension: ".bin" is binary, everything else ASCII.
CloudFormat guess_cloud_format(const std::filesystem::path& path);

struct LoadResult {
  PointCloud cloud;
  std::size_t rejected = 0;  // rows dropped for non-finite coordinates
};

/// Reads a cloud. Throws Error on unreadable files, malformed records (with
/// line number or byte offset) and files with no finite point.
LoadResult load_cloud(const std::filesystem::path& path, CloudFormat format);

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

/// One centroid per occupied leaf x leaf x leaf voxel, ordered by voxel key.
PointCloud voxel_filter(const PointCloud& cloud, double leaf);

/// Keeps points with |x|, |y|, |z| <= half_extent (inclusive).
PointCloud crop_window(const PointCloud& cloud, double half_extent);

PointCloud transform_cloud(const PointCloud& cloud, const Pose2D& pose);

}  // namespace bvmatch

#endif  // BVMATCH_POINTCLOUD_HPP_
