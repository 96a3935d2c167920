// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "bvmatch/eval.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string_view>

namespace bvmatch {

RecallCurve eval_recall(const KeyframeDb& db, const std::vector<RecallQuery>& queries, double threshold, int n_max) {
  if (db.entries.empty()) throw Error("empty database");
  if (queries.empty()) throw Error("no queries");
  if (n_max < 1) throw Error("n_max must be >= 1");
  if (!(threshold >= 0.0)) throw Error("distance threshold must be non-negative");
  RecallCurve curve;
  curve.threshold = threshold;
  curve.queries = queries.size();
  std::vector<std::size_t> first_hit(queries.size(), 0);  // 1-based rank, 0 for none
  const long n = static_cast<long>(queries.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto& q = queries[static_cast<std::size_t>(i)];
    const auto hits = query(db, q.descriptor, n_max);
    for (std::size_t r = 0; r < hits.size(); ++r) {
      const Pose2D& p = db.entries[hits[r].index].pose;
      if (std::hypot(p.tx - q.pose.tx, p.ty - q.pose.ty) < threshold) {
        first_hit[static_cast<std::size_t>(i)] = r + 1;
        break;
      }
    }
  }
  curve.recall.assign(static_cast<std::size_t>(n_max), 0.0);
  for (std::size_t k = 0; k < curve.recall.size(); ++k) {
    std::size_t ok = 0;
    for (auto h : first_hit) ok += (h != 0 && h <= k + 1) ? 1 : 0;
    curve.recall[k] = static_cast<double>(ok) / static_cast<double>(queries.size());
  }
  return curve;
}

PoseError pose_error(const Pose2D& estimate, const Pose2D& truth) {
  const Pose2D d = truth.inverse() * estimate;
  PoseError e;
  e.rte = d.translation_norm();
  e.rre = std::abs(normalize_angle(d.theta)) * 180.0 / std::numbers::pi;
  e.success = e.rte < kSuccessRte && e.rre < kSuccessRre;
  return e;
}

PoseErrorReport eval_pose(const std::vector<Pose2D>& estimates, const std::vector<Pose2D>& truths) {
  if (estimates.size() != truths.size()) {
    throw Error("estimate count " + std::to_string(estimates.size()) + " differs from truth count " +
                std::to_string(truths.size()));
  }
  PoseErrorReport r;
  for (std::size_t i = 0; i < estimates.size(); ++i) r.pairs.push_back(pose_error(estimates[i], truths[i]));
  double st = 0.0;
  double sr = 0.0;
  for (const auto& e : r.pairs) {
    if (!e.success) continue;
    ++r.successes;
    st += e.rte;
    sr += e.rre;
  }
  if (!r.pairs.empty()) r.success_rate = static_cast<double>(r.successes) / static_cast<double>(r.pairs.size());
  if (r.successes > 0) {
    const double n = static_cast<double>(r.successes);
    r.mean_rte = st / n;
    r.mean_rre = sr / n;
    double vt = 0.0;
    double vr = 0.0;
    for (const auto& e : r.pairs) {
      if (!e.success) continue;
      vt += (e.rte - r.mean_rte) * (e.rte - r.mean_rte);
      vr += (e.rre - r.mean_rre) * (e.rre - r.mean_rre);
    }
    r.std_rte = std::sqrt(vt / n);
    r.std_rre = std::sqrt(vr / n);
  }
  return r;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    auto field = line.substr(0, comma);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

double number(std::string_view s, const std::filesystem::path& csv, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(csv.string() + ":" + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

// Rows of four fields (text, three numbers) after a header line.
template <typename F>
void read_rows(const std::filesystem::path& csv, F&& row) {
  std::ifstream in(csv);
  if (!in) throw Error("cannot open " + csv.string());
  std::string line;
  int number_of_line = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++number_of_line;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split(line);
    if (f.size() != 4) {
      throw Error(csv.string() + ":" + std::to_string(number_of_line) + ": expected 4 fields");
    }
    row(std::string(f[0]),
        Pose2D(number(f[1], csv, number_of_line), number(f[2], csv, number_of_line),
               number(f[3], csv, number_of_line)));
  }
}

}  // namespace

std::vector<FrameRecord> read_frame_list(const std::filesystem::path& csv) {
  std::vector<FrameRecord> out;
  const auto base = csv.parent_path();
  read_rows(csv, [&](std::string path, Pose2D pose) {
    FrameRecord r;
    r.path = std::filesystem::path(path);
    if (r.path.is_relative()) r.path = base / r.path;
    r.frame_id = r.path.stem().string();
    r.pose = pose;
    out.push_back(std::move(r));
  });
  return out;
}

void write_frame_list(const std::vector<FrameRecord>& frames, const std::filesystem::path& csv) {
  std::FILE* f = std::fopen(csv.string().c_str(), "w");
  if (!f) throw Error("cannot write " + csv.string());
  std::fprintf(f, "path,tx,ty,theta\n");
  for (const auto& r : frames) {
    std::fprintf(f, "%s,%.17g,%.17g,%.17g\n", r.path.string().c_str(), r.pose.tx, r.pose.ty, r.pose.theta);
  }
  if (std::fclose(f) != 0) throw Error("write failed: " + csv.string());
}

std::vector<std::pair<std::string, Pose2D>> read_pose_csv(const std::filesystem::path& csv) {
  std::vector<std::pair<std::string, Pose2D>> out;
  read_rows(csv, [&](std::string id, Pose2D pose) { out.emplace_back(std::move(id), pose); });
  return out;
}

void write_recall_csv(const RecallCurve& curve, const std::filesystem::path& csv) {
  std::FILE* f = std::fopen(csv.string().c_str(), "w");
  if (!f) throw Error("cannot write " + csv.string());
  std::fprintf(f, "n,recall,threshold_m,queries\n");
  for (std::size_t k = 0; k < curve.recall.size(); ++k) {
    std::fprintf(f, "%zu,%.6f,%g,%zu\n", k + 1, curve.recall[k], curve.threshold, curve.queries);
  }
  if (std::fclose(f) != 0) throw Error("write failed: " + csv.string());
}

void write_pose_report_csv(const PoseErrorReport& report, const std::vector<std::string>& ids,
                           const std::filesystem::path& csv) {
  std::FILE* f = std::fopen(csv.string().c_str(), "w");
  if (!f) throw Error("cannot write " + csv.string());
  std::fprintf(f, "id,rte_m,rre_deg,success\n");
  for (std::size_t i = 0; i < report.pairs.size(); ++i) {
    const auto& e = report.pairs[i];
    std::fprintf(f, "%s,%.6f,%.6f,%d\n", i < ids.size() ? ids[i].c_str() : std::to_string(i).c_str(), e.rte, e.rre,
                 e.success ? 1 : 0);
  }
  if (std::fclose(f) != 0) throw Error("write failed: " + csv.string());
}

}  // namespace bvmatch
