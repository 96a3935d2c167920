// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics: Top-N recall for retrieval and RTE/RRE for poses.

#ifndef BVMATCH_EVAL_HPP_
#define BVMATCH_EVAL_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "bvmatch/pointcloud.hpp"
#include "bvmatch/retrieval.hpp"

namespace bvmatch {

struct RecallCurve {
  double threshold = 25.0;   // t, meters
  std::size_t queries = 0;
  std::vector<double> recall;  // recall[n - 1] for n = 1..n_max

  double at(int n) const { return recall.at(static_cast<std::size_t>(n - 1)); }
};

struct RecallQuery {
  GlobalDescriptor descriptor;
  Pose2D pose;
};

/// A query succeeds at rank n when one of its n nearest keyframes lies less
/// than t meters (planar) from its pose.
RecallCurve eval_recall(const KeyframeDb& db, const std::vector<RecallQuery>& queries, double threshold, int n_max);

struct PoseError {
  double rte = 0.0;  // meters
  double rre = 0.0;  // degrees
  bool success = false;
};

struct PoseErrorReport {
  std::vector<PoseError> pairs;
  std::size_t successes = 0;
  double success_rate = 0.0;
  // Over successful pairs only.
  double mean_rte = 0.0;
  double std_rte = 0.0;
  double mean_rre = 0.0;
  double std_rre = 0.0;
};

inline constexpr double kSuccessRte = 2.0;  // meters
inline constexpr double kSuccessRre = 5.0;  // degrees

/// Errors of truth^-1 * estimate.
PoseError pose_error(const Pose2D& estimate, const Pose2D& truth);

PoseErrorReport eval_pose(const std::vector<Pose2D>& estimates, const std::vector<Pose2D>& truths);

/// "path,tx,ty,theta" rows after a header; relative paths resolve against
/// the list's directory. Frame ids are the file stems.
struct FrameRecord {
  std::filesystem::path path;
  std::string frame_id;
  Pose2D pose;
};
std::vector<FrameRecord> read_frame_list(const std::filesystem::path& csv);
void write_frame_list(const std::vector<FrameRecord>& frames, const std::filesystem::path& csv);

/// "id,tx,ty,theta" rows after a header.
std::vector<std::pair<std::string, Pose2D>> read_pose_csv(const std::filesystem::path& csv);

void write_recall_csv(const RecallCurve& curve, const std::filesystem::path& csv);
void write_pose_report_csv(const PoseErrorReport& report, const std::vector<std::string>& ids,
                           const std::filesystem::path& csv);

}  // namespace bvmatch

#endif  // BVMATCH_EVAL_HPP_
