// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Settings shared by the command-line tools and the composed pipeline:
// cloud -> BV image -> BVFT descriptors, and pairwise registration.

#ifndef BVMATCH_PIPELINE_HPP_
#define BVMATCH_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>

#include "bvmatch/bvft.hpp"
#include "bvmatch/bvimage.hpp"
#include "bvmatch/loggabor.hpp"
#include "bvmatch/registration.hpp"

namespace bvmatch {

struct PipelineConfig {
  BvGeometry geometry;
  LogGaborParams gabor;
  BvftConfig bvft;
  double match_ratio = 0.9;
  RansacParams ransac;
  IcpParams icp;
  int words = 10000;
  int kmeans_max_iter = 50;
  std::size_t train_max_descriptors = 0;  // 0 keeps every descriptor
  double keyframe_spacing = 10.0;
  double recall_threshold = 25.0;
  int recall_top_n = 25;
  std::uint64_t seed = 0;
};

/// Applies "key = value" lines ('#' starts a comment) on top of config.
/// Unknown keys and malformed values throw Error naming the line.
void parse_config(std::istream& in, PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

/// The config as "key = value" lines, readable by parse_config.
std::string format_config(const PipelineConfig& config);

/// Holds the filter bank for the configured image size.
class Frontend {
 public:
  explicit Frontend(const PipelineConfig& config);

  const PipelineConfig& config() const { return config_; }
  const FilterBank& bank() const { return *bank_; }

  BvImage image(const PointCloud& cloud) const;
  DescriptorSet describe(const BvImage& image) const;
  DescriptorSet describe(const PointCloud& cloud) const;

  /// Cropped and voxel-filtered cloud used by ICP.
  PointCloud icp_cloud(const PointCloud& cloud) const;

 private:
  PipelineConfig config_;
  std::shared_ptr<const FilterBank> bank_;
};

struct PairResult {
  std::string id_a;
  std::string id_b;
  Pose2D pose;    // refined, b = transform_cloud(a, pose)
  Pose2D coarse;  // from the image transform
  std::size_t matches = 0;
  RansacResult ransac;
  IcpResult icp;
  double residual_rms = 0.0;  // meters, inlier keypoints under the image transform
};

/// match -> RANSAC -> metric pose -> planar ICP. Throws Error when RANSAC fails.
PairResult register_pair(const Frontend& frontend, const PointCloud& a, const DescriptorSet& da,
                         const PointCloud& b, const DescriptorSet& db);
PairResult register_pair(const Frontend& frontend, const PointCloud& a, const PointCloud& b);

/// CSV header and row: id_a,id_b,theta_deg,tx_m,ty_m,inliers,residual_rms_m.
std::string report_header();
std::string report_line(const PairResult& r);

}  // namespace bvmatch

#endif  // BVMATCH_PIPELINE_HPP_
