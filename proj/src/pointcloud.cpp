// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "bvmatch/pointcloud.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <tuple>

#include "bvmatch/common.hpp"

namespace bvmatch {

double normalize_angle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

Pose2D Pose2D::inverse() const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {-(c * tx + s * ty), -(-s * tx + c * ty), -theta};
}

Pose2D Pose2D::operator*(const Pose2D& rhs) const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * rhs.tx - s * rhs.ty + tx, s * rhs.tx + c * rhs.ty + ty, theta + rhs.theta};
}

Point3 Pose2D::apply(const Point3& p) const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * p.x - s * p.y + tx, s * p.x + c * p.y + ty, p.z};
}

double Pose2D::translation_norm() const { return std::hypot(tx, ty); }

CloudFormat parse_cloud_format(std::string_view name) {
  if (name == "xyz-ascii") return CloudFormat::kXyzAscii;
  if (name == "xyz-bin") return CloudFormat::kXyzBinary;
  throw Error("unknown cloud format '" + std::string(name) + "'");
}

CloudFormat guess_cloud_format(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? CloudFormat::kXyzBinary : CloudFormat::kXyzAscii;
}

namespace {

bool finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

// Splits on blanks; returns false unless exactly three numbers are present.
bool parse_xyz_line(std::string_view line, Point3& out) {
  std::array<double, 3> values{};
  std::size_t count = 0;
  std::size_t pos = 0;
  while (true) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos == line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
    if (count == 3) return false;
    std::string_view token = line.substr(pos, end - pos);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) return false;
    values[count++] = value;
    pos = end;
  }
  if (count != 3) return false;
  out = {values[0], values[1], values[2]};
  return true;
}

float load_f32_le(const unsigned char* bytes) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, bytes, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

void store_f32_le(float value, unsigned char* bytes) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  std::memcpy(bytes, &bits, sizeof(bits));
}

}  // namespace

LoadResult load_cloud(const std::filesystem::path& path, CloudFormat format) {
  LoadResult result;
  result.cloud.frame_id = path.stem().string();
  auto& points = result.cloud.points;

  if (format == CloudFormat::kXyzAscii) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view view(line);
      if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
      const auto first = view.find_first_not_of(" \t");
      if (first == std::string_view::npos || view[first] == '#') continue;
      Point3 p;
      if (!parse_xyz_line(view, p)) {
        throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed record");
      }
      if (finite(p)) {
        points.push_back(p);
      } else {
        ++result.rejected;
      }
    }
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() % 12 != 0) {
      throw Error(path.string() + ": malformed record at byte offset " +
                  std::to_string(bytes.size() - bytes.size() % 12) +
                  " (length not a multiple of 12)");
    }
    points.reserve(bytes.size() / 12);
    for (std::size_t off = 0; off < bytes.size(); off += 12) {
      Point3 p{load_f32_le(&bytes[off]), load_f32_le(&bytes[off + 4]),
               load_f32_le(&bytes[off + 8])};
      if (finite(p)) {
        points.push_back(p);
      } else {
        ++result.rejected;
      }
    }
  }

  if (points.empty()) throw Error(path.string() + ": no valid points");
  return result;
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  if (format == CloudFormat::kXyzAscii) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    for (const auto& p : cloud.points) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
    if (!out) throw Error("write failed: " + path.string());
    return;
  }
  std::vector<unsigned char> bytes(cloud.points.size() * 12);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    store_f32_le(static_cast<float>(cloud.points[i].x), &bytes[i * 12]);
    store_f32_le(static_cast<float>(cloud.points[i].y), &bytes[i * 12 + 4]);
    store_f32_le(static_cast<float>(cloud.points[i].z), &bytes[i * 12 + 8]);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

PointCloud voxel_filter(const PointCloud& cloud, double leaf) {
  if (!(leaf > 0.0)) throw Error("voxel leaf size must be positive");

  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::vector<std::pair<Key, std::size_t>> keyed;
  keyed.reserve(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    keyed.push_back({{static_cast<std::int64_t>(std::floor(p.x / leaf)),
                      static_cast<std::int64_t>(std::floor(p.y / leaf)),
                      static_cast<std::int64_t>(std::floor(p.z / leaf))},
                     i});
  }
  std::sort(keyed.begin(), keyed.end());

  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.pose = cloud.pose;
  for (std::size_t begin = 0; begin < keyed.size();) {
    std::size_t end = begin;
    double sx = 0.0, sy = 0.0, sz = 0.0;
    while (end < keyed.size() && keyed[end].first == keyed[begin].first) {
      const auto& p = cloud.points[keyed[end].second];
      sx += p.x;
      sy += p.y;
      sz += p.z;
      ++end;
    }
    const double n = static_cast<double>(end - begin);
    out.points.push_back({sx / n, sy / n, sz / n});
    begin = end;
  }
  return out;
}

PointCloud crop_window(const PointCloud& cloud, double half_extent) {
  if (!(half_extent > 0.0)) throw Error("crop window half extent must be positive");
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.pose = cloud.pose;
  std::copy_if(cloud.points.begin(), cloud.points.end(), std::back_inserter(out.points),
               [half_extent](const Point3& p) {
                 return std::abs(p.x) <= half_extent && std::abs(p.y) <= half_extent &&
                        std::abs(p.z) <= half_extent;
               });
  return out;
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose2D& pose) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.pose = cloud.pose;
  out.points.reserve(cloud.points.size());
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  for (const auto& p : cloud.points) {
    out.points.push_back({c * p.x - s * p.y + pose.tx, s * p.x + c * p.y + pose.ty, p.z});
  }
  return out;
}

}  // namespace bvmatch
