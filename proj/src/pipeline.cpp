// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "bvmatch/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string_view>

namespace bvmatch {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw Error("bad value '" + std::string(text) + "'");
  return value;
}

using Setter = std::function<void(PipelineConfig&, std::string_view)>;

template <typename T>
Setter set(T PipelineConfig::*field) {
  return [field](PipelineConfig& c, std::string_view v) { c.*field = parse_value<T>(v); };
}

template <typename S, typename T>
Setter set(S PipelineConfig::*group, T S::*field) {
  return [group, field](PipelineConfig& c, std::string_view v) { (c.*group).*field = parse_value<T>(v); };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"cell", set(&PipelineConfig::geometry, &BvGeometry::cell)},
      {"half_extent", set(&PipelineConfig::geometry, &BvGeometry::half_extent)},
      {"scales", set(&PipelineConfig::gabor, &LogGaborParams::scales)},
      {"orientations", set(&PipelineConfig::gabor, &LogGaborParams::orientations)},
      {"min_wavelength", set(&PipelineConfig::gabor, &LogGaborParams::min_wavelength)},
      {"scale_multiplier", set(&PipelineConfig::gabor, &LogGaborParams::scale_multiplier)},
      {"sigma_f_ratio", set(&PipelineConfig::gabor, &LogGaborParams::sigma_f_ratio)},
      {"sigma_omega", set(&PipelineConfig::gabor, &LogGaborParams::sigma_omega)},
      {"lowpass_cutoff", set(&PipelineConfig::gabor, &LogGaborParams::lowpass_cutoff)},
      {"lowpass_order", set(&PipelineConfig::gabor, &LogGaborParams::lowpass_order)},
      {"padding", set(&PipelineConfig::gabor, &LogGaborParams::padding)},
      {"fast_threshold", set(&PipelineConfig::bvft, &BvftConfig::fast_threshold)},
      {"max_keypoints", set(&PipelineConfig::bvft, &BvftConfig::max_keypoints)},
      {"patch_size", set(&PipelineConfig::bvft, &BvftConfig::patch_size)},
      {"grid", set(&PipelineConfig::bvft, &BvftConfig::grid)},
      {"noise_floor_factor", set(&PipelineConfig::bvft, &BvftConfig::noise_floor_factor)},
      {"match_ratio", set(&PipelineConfig::match_ratio)},
      {"inlier_px", set(&PipelineConfig::ransac, &RansacParams::inlier_px)},
      {"ransac_max_iters", set(&PipelineConfig::ransac, &RansacParams::max_iters)},
      {"ransac_confidence", set(&PipelineConfig::ransac, &RansacParams::confidence)},
      {"icp_max_iter", set(&PipelineConfig::icp, &IcpParams::max_iter)},
      {"icp_tolerance", set(&PipelineConfig::icp, &IcpParams::tolerance)},
      {"icp_max_correspondence", set(&PipelineConfig::icp, &IcpParams::max_correspondence)},
      {"words", set(&PipelineConfig::words)},
      {"kmeans_max_iter", set(&PipelineConfig::kmeans_max_iter)},
      {"train_max_descriptors", set(&PipelineConfig::train_max_descriptors)},
      {"keyframe_spacing", set(&PipelineConfig::keyframe_spacing)},
      {"recall_threshold", set(&PipelineConfig::recall_threshold)},
      {"recall_top_n", set(&PipelineConfig::recall_top_n)},
      {"seed", set(&PipelineConfig::seed)},
  };
  return table;
}

}  // namespace

void parse_config(std::istream& in, PipelineConfig& config) {
  std::string line;
  int number = 0;
  bool orientations_set = false;
  bool sigma_set = false;
  while (std::getline(in, line)) {
    ++number;
    std::string_view s(line);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw Error("config line " + std::to_string(number) + ": expected key = value");
    const auto key = trim(s.substr(0, eq));
    const auto value = trim(s.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw Error("config line " + std::to_string(number) + ": unknown key '" + std::string(key) + "'");
    }
    try {
      it->second(config, value);
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(number) + ": " + e.what());
    }
    orientations_set = orientations_set || key == "orientations";
    sigma_set = sigma_set || key == "sigma_omega";
  }
  if (orientations_set && !sigma_set && config.gabor.orientations > 0) {
    config.gabor.sigma_omega = std::numbers::pi / config.gabor.orientations / 1.2;
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  PipelineConfig config;
  try {
    parse_config(in, config);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return config;
}

std::string format_config(const PipelineConfig& c) {
  std::ostringstream out;
  auto real = [&](const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << " = " << buf << '\n';
  };
  auto integer = [&](const char* key, auto v) { out << key << " = " << v << '\n'; };
  real("cell", c.geometry.cell);
  real("half_extent", c.geometry.half_extent);
  integer("scales", c.gabor.scales);
  integer("orientations", c.gabor.orientations);
  real("min_wavelength", c.gabor.min_wavelength);
  real("scale_multiplier", c.gabor.scale_multiplier);
  real("sigma_f_ratio", c.gabor.sigma_f_ratio);
  real("sigma_omega", c.gabor.sigma_omega);
  real("lowpass_cutoff", c.gabor.lowpass_cutoff);
  integer("lowpass_order", c.gabor.lowpass_order);
  integer("padding", c.gabor.padding);
  real("fast_threshold", c.bvft.fast_threshold);
  integer("max_keypoints", c.bvft.max_keypoints);
  integer("patch_size", c.bvft.patch_size);
  integer("grid", c.bvft.grid);
  real("noise_floor_factor", c.bvft.noise_floor_factor);
  real("match_ratio", c.match_ratio);
  real("inlier_px", c.ransac.inlier_px);
  integer("ransac_max_iters", c.ransac.max_iters);
  real("ransac_confidence", c.ransac.confidence);
  integer("icp_max_iter", c.icp.max_iter);
  real("icp_tolerance", c.icp.tolerance);
  real("icp_max_correspondence", c.icp.max_correspondence);
  integer("words", c.words);
  integer("kmeans_max_iter", c.kmeans_max_iter);
  integer("train_max_descriptors", c.train_max_descriptors);
  real("keyframe_spacing", c.keyframe_spacing);
  real("recall_threshold", c.recall_threshold);
  integer("recall_top_n", c.recall_top_n);
  integer("seed", c.seed);
  return out.str();
}

Frontend::Frontend(const PipelineConfig& config) : config_(config) {
  config_.bvft.validate(config_.gabor.orientations);
  const int side = config_.geometry.side();
  bank_ = std::make_shared<const FilterBank>(side, side, config_.gabor);
}

BvImage Frontend::image(const PointCloud& cloud) const {
  return make_bv_image(cloud, config_.geometry.cell, config_.geometry.half_extent);
}

DescriptorSet Frontend::describe(const BvImage& image) const {
  return describe_frame(image, *bank_, config_.bvft);
}

DescriptorSet Frontend::describe(const PointCloud& cloud) const {
  DescriptorSet set = describe(image(cloud));
  set.frame_id = cloud.frame_id;
  return set;
}

PointCloud Frontend::icp_cloud(const PointCloud& cloud) const {
  return voxel_filter(crop_window(cloud, config_.geometry.half_extent), config_.geometry.cell);
}

PairResult register_pair(const Frontend& frontend, const PointCloud& a, const DescriptorSet& da,
                         const PointCloud& b, const DescriptorSet& db) {
  const PipelineConfig& c = frontend.config();
  PairResult r;
  r.id_a = a.frame_id;
  r.id_b = b.frame_id;
  const auto matches = match_descriptors(da, db, c.match_ratio);
  r.matches = matches.size();
  r.ransac = ransac_rigid(matches, da, db, c.geometry, c.ransac);
  r.coarse = pose_from_image_transform(r.ransac.transform, c.geometry.cell);
  r.icp = icp_refine_planar(frontend.icp_cloud(a), frontend.icp_cloud(b), r.coarse, c.icp);
  r.pose = r.icp.pose;
  double sum = 0.0;
  for (const auto& m : r.ransac.inliers) {
    const Point2 p = r.ransac.transform.apply(
        centered_pixel(da.descriptors[static_cast<std::size_t>(m.index_a)].keypoint, c.geometry));
    const Point2 q = centered_pixel(db.descriptors[static_cast<std::size_t>(m.index_b)].keypoint, c.geometry);
    sum += (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
  }
  r.residual_rms = c.geometry.cell * std::sqrt(sum / static_cast<double>(r.ransac.inliers.size()));
  return r;
}

PairResult register_pair(const Frontend& frontend, const PointCloud& a, const PointCloud& b) {
  return register_pair(frontend, a, frontend.describe(a), b, frontend.describe(b));
}

std::string report_header() { return "id_a,id_b,theta_deg,tx_m,ty_m,inliers,residual_rms_m"; }

std::string report_line(const PairResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%zu,%.6f", r.pose.theta * 180.0 / std::numbers::pi, r.pose.tx,
                r.pose.ty, r.ransac.inliers.size(), r.residual_rms);
  return r.id_a + "," + r.id_b + buf;
}

}  // namespace bvmatch
