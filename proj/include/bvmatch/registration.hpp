// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Descriptor matching, RANSAC rigid estimation between BV images, conversion
// of the image transform to a metric pose and planar ICP refinement.
//
// Image transforms act on origin-centered pixel coordinates
//   u_c = u + 0.5 - C/g,  v_c = v + 0.5 - C/g
// and follow
//   u' =  cos(theta) u + sin(theta) v + t_u
//   v' = -sin(theta) u + cos(theta) v + t_v.
// Since v grows towards -y, the pose p with b = transform_cloud(a, p) maps to
// theta = p.theta, t_u = p.tx / g, t_v = -p.ty / g.

#ifndef BVMATCH_REGISTRATION_HPP_
#define BVMATCH_REGISTRATION_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "bvmatch/bvft.hpp"
#include "bvmatch/pointcloud.hpp"

namespace bvmatch {

struct Match {
  int index_a = 0;  // descriptor index in set a
  int index_b = 0;  // descriptor index in set b
  double distance = 0.0;

  bool operator==(const Match&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Correspondence {
  Point2 src;
  Point2 dst;
};

struct ImageTransform2D {
  double theta = 0.0;  // radians, in (-pi, pi]
  double t_u = 0.0;    // pixels
  double t_v = 0.0;    // pixels

  Point2 apply(const Point2& p) const;
};

/// Descriptor distance in double precision.
double descriptor_distance(const Descriptor& a, const Descriptor& b);

/// One match per keypoint of a. Distances between two keypoints are the
/// minimum over both descriptor variants on each side; the ratio test
/// compares the nearest and second-nearest distinct keypoints of b, so a
/// keypoint of a needs at least two keypoints in b to be matched. Results
/// are ordered by keypoint of a.
std::vector<Match> match_descriptors(const DescriptorSet& a, const DescriptorSet& b, double ratio);

/// Least-squares rotation and translation (no scale) mapping src onto dst.
ImageTransform2D estimate_rigid(const std::vector<Correspondence>& pairs);

struct RansacParams {
  double inlier_px = 2.5;
  int max_iters = 2000;
  double confidence = 0.999;
  std::uint64_t seed = 0;
};

struct RansacResult {
  ImageTransform2D transform;
  std::vector<Match> inliers;
  int iterations_used = 0;
};

/// Origin-centered pixel coordinates of a keypoint in a BV image.
Point2 centered_pixel(const Keypoint& kp, const BvGeometry& geometry);

/// Two-point RANSAC over matches between sets a and b (both on geometry).
/// Throws Error "fewer than 2 matches" or "registration failed" (no
/// hypothesis with at least 3 inliers).
RansacResult ransac_rigid(const std::vector<Match>& matches, const DescriptorSet& a, const DescriptorSet& b,
                          const BvGeometry& geometry, const RansacParams& params);

/// Same contract on explicit correspondences; the Match indices of the result
/// refer to positions in points.
RansacResult ransac_rigid(const std::vector<Correspondence>& points, const RansacParams& params);

Pose2D pose_from_image_transform(const ImageTransform2D& t, double cell);
ImageTransform2D image_transform_from_pose(const Pose2D& p, double cell);

struct IcpParams {
  int max_iter = 30;
  double tolerance = 1e-4;          // meters, stop when the residual changes less
  double max_correspondence = 2.0;  // meters
};

struct IcpResult {
  Pose2D pose;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  int iterations = 0;  // accepted updates
};

/// Mean over a's points of the planar distance to the nearest point of b
/// under pose, each distance clipped at max_correspondence.
double planar_residual(const PointCloud& a, const PointCloud& b, const Pose2D& pose,
                       double max_correspondence);

/// Point-to-point ICP on (x, y). Steps that would raise planar_residual are
/// rejected, so final_residual <= initial_residual.
IcpResult icp_refine_planar(const PointCloud& a, const PointCloud& b, const Pose2D& init,
                            const IcpParams& params);

namespace serial {

std::vector<Match> match_descriptors(const DescriptorSet& a, const DescriptorSet& b, double ratio);

}  // namespace serial

}  // namespace bvmatch

#endif  // BVMATCH_REGISTRATION_HPP_
