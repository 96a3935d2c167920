// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "bvmatch/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace bvmatch {

Point2 ImageTransform2D::apply(const Point2& p) const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * p.x + s * p.y + t_u, -s * p.x + c * p.y + t_v};
}

double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  const std::size_t n = a.vector.size();
  if (b.vector.size() != n) throw Error("descriptor dimensions differ");
  const float* x = a.vector.data();
  const float* y = b.vector.data();
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    for (std::size_t r = 0; r < 4; ++r) {
      const double d = static_cast<double>(x[k + r]) - static_cast<double>(y[k + r]);
      acc[r] += d * d;
    }
  }
  for (; k < n; ++k) {
    const double d = static_cast<double>(x[k]) - static_cast<double>(y[k]);
    acc[0] += d * d;
  }
  return std::sqrt((acc[0] + acc[1]) + (acc[2] + acc[3]));
}

namespace {

void check_match_inputs(const DescriptorSet& a, const DescriptorSet& b, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error("ratio must lie in (0, 1]");
  if (a.descriptors.size() % 2 != 0 || b.descriptors.size() % 2 != 0) {
    throw Error("descriptor sets must hold descriptor pairs");
  }
  if (!a.descriptors.empty() && !b.descriptors.empty() && a.dimension() != b.dimension()) {
    throw Error("descriptor dimensions differ between sets");
  }
}

// Best match for keypoint i of a, or a negative index_a when the ratio test fails.
Match match_keypoint(const DescriptorSet& a, const DescriptorSet& b, std::size_t i, double ratio) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double best = kInf;
  double second = kInf;
  Match m{-1, -1, 0.0};
  for (std::size_t j = 0; j < b.keypoint_count(); ++j) {
    double d = kInf;
    int ia = 0;
    int ib = 0;
    for (int va = 0; va < 2; ++va) {
      for (int vb = 0; vb < 2; ++vb) {
        const auto x = 2 * i + static_cast<std::size_t>(va);
        const auto y = 2 * j + static_cast<std::size_t>(vb);
        const double dd = descriptor_distance(a.descriptors[x], b.descriptors[y]);
        if (dd < d) {
          d = dd;
          ia = static_cast<int>(x);
          ib = static_cast<int>(y);
        }
      }
    }
    if (d < best) {
      second = best;
      best = d;
      m = {ia, ib, d};
    } else if (d < second) {
      second = d;
    }
  }
  if (second == kInf) return {-1, -1, 0.0};
  // Equal zero distances count as a tie, i.e. a ratio of 1.
  const bool pass = second == 0.0 ? ratio >= 1.0 : best <= ratio * second;
  if (!pass) return {-1, -1, 0.0};
  return m;
}

std::vector<Match> compact(const std::vector<Match>& all) {
  std::vector<Match> out;
  for (const auto& m : all) {
    if (m.index_a >= 0) out.push_back(m);
  }
  return out;
}

}  // namespace

std::vector<Match> match_descriptors(const DescriptorSet& a, const DescriptorSet& b, double ratio) {
  check_match_inputs(a, b, ratio);
  if (a.descriptors.empty() || b.descriptors.empty()) return {};
  std::vector<Match> all(a.keypoint_count());
  const auto n = static_cast<long>(all.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < n; ++i) {
    all[static_cast<std::size_t>(i)] = match_keypoint(a, b, static_cast<std::size_t>(i), ratio);
  }
  return compact(all);
}

namespace serial {

std::vector<Match> match_descriptors(const DescriptorSet& a, const DescriptorSet& b, double ratio) {
  check_match_inputs(a, b, ratio);
  if (a.descriptors.empty() || b.descriptors.empty()) return {};
  std::vector<Match> all;
  for (std::size_t i = 0; i < a.keypoint_count(); ++i) all.push_back(match_keypoint(a, b, i, ratio));
  return compact(all);
}

}  // namespace serial

ImageTransform2D estimate_rigid(const std::vector<Correspondence>& pairs) {
  if (pairs.size() < 2) throw Error("rigid fit needs at least 2 correspondences");
  const double n = static_cast<double>(pairs.size());
  Point2 ps;
  Point2 qs;
  for (const auto& c : pairs) {
    ps.x += c.src.x;
    ps.y += c.src.y;
    qs.x += c.dst.x;
    qs.y += c.dst.y;
  }
  const Point2 pm{ps.x / n, ps.y / n};
  const Point2 qm{qs.x / n, qs.y / n};
  double spread = 0.0;
  double dot = 0.0;
  double cross = 0.0;
  for (const auto& c : pairs) {
    const double px = c.src.x - pm.x;
    const double py = c.src.y - pm.y;
    const double qx = c.dst.x - qm.x;
    const double qy = c.dst.y - qm.y;
    spread += px * px + py * py;
    dot += qx * px + qy * py;
    cross += qx * py - qy * px;
  }
  if (spread <= 1e-20) throw Error("degenerate correspondences: source points coincide");
  ImageTransform2D t;
  t.theta = normalize_angle(std::atan2(cross, dot));
  const double c = std::cos(t.theta);
  const double s = std::sin(t.theta);
  t.t_u = qm.x - (c * pm.x + s * pm.y);
  t.t_v = qm.y - (-s * pm.x + c * pm.y);
  return t;
}

Point2 centered_pixel(const Keypoint& kp, const BvGeometry& geometry) {
  const double shift = 0.5 - geometry.half_extent / geometry.cell;
  return {kp.u + shift, kp.v + shift};
}

namespace {

double squared_residual(const ImageTransform2D& t, const Correspondence& c) {
  const Point2 p = t.apply(c.src);
  const double dx = p.x - c.dst.x;
  const double dy = p.y - c.dst.y;
  return dx * dx + dy * dy;
}

std::vector<int> inlier_indices(const std::vector<Correspondence>& pts, const ImageTransform2D& t, double thr2) {
  std::vector<int> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (squared_residual(t, pts[i]) <= thr2) out.push_back(static_cast<int>(i));
  }
  return out;
}

int iteration_bound(double confidence, std::size_t inliers, std::size_t total, int max_iters) {
  const double w = static_cast<double>(inliers) / static_cast<double>(total);
  const double p_good = w * w;
  if (p_good >= 1.0) return 1;
  if (p_good <= 0.0) return max_iters;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - p_good);
  if (!(n < max_iters)) return max_iters;
  return std::max(1, static_cast<int>(std::ceil(n)));
}

constexpr int kBatch = 64;

}  // namespace

RansacResult ransac_rigid(const std::vector<Correspondence>& pts, const RansacParams& params) {
  if (pts.size() < 2) throw Error("fewer than 2 matches");
  if (!(params.inlier_px > 0.0) || params.max_iters < 1 ||
      !(params.confidence > 0.0 && params.confidence < 1.0)) {
    throw Error("bad RANSAC parameters");
  }
  const double thr2 = params.inlier_px * params.inlier_px;
  const auto n = pts.size();
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::uniform_int_distribution<std::size_t> second(0, n - 2);

  int best_count = 0;
  ImageTransform2D best;
  int bound = params.max_iters;
  int done = 0;
  std::vector<std::pair<std::size_t, std::size_t>> samples;
  std::vector<int> counts;
  std::vector<ImageTransform2D> hyps;
  while (done < bound) {
    const int batch = std::min(kBatch, bound - done);
    samples.resize(static_cast<std::size_t>(batch));
    for (auto& s : samples) {
      s.first = first(rng);
      s.second = second(rng);
      if (s.second >= s.first) ++s.second;
    }
    counts.assign(samples.size(), -1);
    hyps.assign(samples.size(), ImageTransform2D{});
#pragma omp parallel for schedule(static)
    for (int k = 0; k < batch; ++k) {
      const auto& s = samples[static_cast<std::size_t>(k)];
      const Correspondence& c0 = pts[s.first];
      const Correspondence& c1 = pts[s.second];
      const double ds = std::hypot(c0.src.x - c1.src.x, c0.src.y - c1.src.y);
      const double dd = std::hypot(c0.dst.x - c1.dst.x, c0.dst.y - c1.dst.y);
      if (ds < 1e-9 || std::abs(ds - dd) > 2.0 * params.inlier_px) continue;
      const ImageTransform2D t = estimate_rigid({c0, c1});
      int count = 0;
      for (const auto& c : pts) count += squared_residual(t, c) <= thr2 ? 1 : 0;
      counts[static_cast<std::size_t>(k)] = count;
      hyps[static_cast<std::size_t>(k)] = t;
    }
    for (std::size_t k = 0; k < samples.size(); ++k) {
      if (counts[k] > best_count) {
        best_count = counts[k];
        best = hyps[k];
      }
    }
    done += batch;
    if (best_count > 0) {
      bound = std::min(bound, iteration_bound(params.confidence, static_cast<std::size_t>(best_count), n,
                                              params.max_iters));
    }
  }
  if (best_count < 3) throw Error("registration failed");

  // Refit on the consensus set while it does not shrink.
  ImageTransform2D t = best;
  std::vector<int> inliers = inlier_indices(pts, t, thr2);
  for (int round = 0; round < 20; ++round) {
    std::vector<Correspondence> subset;
    subset.reserve(inliers.size());
    for (int i : inliers) subset.push_back(pts[static_cast<std::size_t>(i)]);
    const ImageTransform2D refit = estimate_rigid(subset);
    std::vector<int> next = inlier_indices(pts, refit, thr2);
    if (next.size() < inliers.size()) break;
    t = refit;
    if (next == inliers) break;
    inliers = std::move(next);
  }
  inliers = inlier_indices(pts, t, thr2);
  if (inliers.size() < 3) throw Error("registration failed");

  RansacResult r;
  r.transform = t;
  r.iterations_used = done;
  for (int i : inliers) {
    r.inliers.push_back({i, i, std::sqrt(squared_residual(t, pts[static_cast<std::size_t>(i)]))});
  }
  return r;
}

RansacResult ransac_rigid(const std::vector<Match>& matches, const DescriptorSet& a, const DescriptorSet& b,
                          const BvGeometry& geometry, const RansacParams& params) {
  if (matches.size() < 2) throw Error("fewer than 2 matches");
  std::vector<Correspondence> pts;
  pts.reserve(matches.size());
  for (const auto& m : matches) {
    if (m.index_a < 0 || static_cast<std::size_t>(m.index_a) >= a.descriptors.size() || m.index_b < 0 ||
        static_cast<std::size_t>(m.index_b) >= b.descriptors.size()) {
      throw Error("match index out of range");
    }
    pts.push_back({centered_pixel(a.descriptors[static_cast<std::size_t>(m.index_a)].keypoint, geometry),
                   centered_pixel(b.descriptors[static_cast<std::size_t>(m.index_b)].keypoint, geometry)});
  }
  RansacResult r = ransac_rigid(pts, params);
  for (auto& in : r.inliers) in = matches[static_cast<std::size_t>(in.index_a)];
  return r;
}

Pose2D pose_from_image_transform(const ImageTransform2D& t, double cell) {
  if (!(cell > 0.0)) throw Error("cell size must be positive");
  return Pose2D(cell * t.t_u, -cell * t.t_v, t.theta);
}

ImageTransform2D image_transform_from_pose(const Pose2D& p, double cell) {
  if (!(cell > 0.0)) throw Error("cell size must be positive");
  return {normalize_angle(p.theta), p.tx / cell, -p.ty / cell};
}

namespace {

// Uniform bucket grid over the (x, y) projection of a cloud.
class PlanarIndex {
 public:
  PlanarIndex(const PointCloud& cloud, double cell) : cell_(cell) {
    double x0 = std::numeric_limits<double>::infinity();
    double y0 = x0;
    double x1 = -x0;
    double y1 = -x0;
    for (const auto& p : cloud.points) {
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
    x0_ = x0;
    y0_ = y0;
    nx_ = static_cast<int>((x1 - x0) / cell) + 1;
    ny_ = static_cast<int>((y1 - y0) / cell) + 1;
    start_.assign(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_) + 1, 0);
    std::vector<std::size_t> key(cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      key[i] = bucket(cell_x(cloud.points[i].x), cell_y(cloud.points[i].y));
      ++start_[key[i] + 1];
    }
    for (std::size_t k = 1; k < start_.size(); ++k) start_[k] += start_[k - 1];
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    pts_.resize(cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      pts_[fill[key[i]]++] = {cloud.points[i].x, cloud.points[i].y};
    }
  }

  // Nearest point within the cell size, or false.
  bool nearest(const Point2& q, Point2& out, double& dist) const {
    const int cx = cell_x(q.x);
    const int cy = cell_y(q.y);
    double best = cell_ * cell_;
    bool found = false;
    for (int j = std::max(cy - 1, 0); j <= std::min(cy + 1, ny_ - 1); ++j) {
      for (int i = std::max(cx - 1, 0); i <= std::min(cx + 1, nx_ - 1); ++i) {
        const std::size_t b = bucket(i, j);
        for (std::size_t k = start_[b]; k < start_[b + 1]; ++k) {
          const double dx = pts_[k].x - q.x;
          const double dy = pts_[k].y - q.y;
          const double d2 = dx * dx + dy * dy;
          if (d2 < best || (!found && d2 <= best)) {
            best = d2;
            out = pts_[k];
            found = true;
          }
        }
      }
    }
    dist = std::sqrt(best);
    return found;
  }

 private:
  int cell_x(double x) const { return static_cast<int>(std::floor((x - x0_) / cell_)); }
  int cell_y(double y) const { return static_cast<int>(std::floor((y - y0_) / cell_)); }
  std::size_t bucket(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
  }

  double cell_;
  double x0_ = 0.0;
  double y0_ = 0.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<std::size_t> start_;
  std::vector<Point2> pts_;
};

struct Association {
  std::vector<Point2> src;
  std::vector<Point2> dst;
  double residual = 0.0;
};

Association associate(const PointCloud& a, const PlanarIndex& index, const Pose2D& pose, double max_corr) {
  const std::size_t n = a.points.size();
  std::vector<Point2> moved(n);
  std::vector<Point2> nearest(n);
  std::vector<double> dist(n, max_corr);
  std::vector<std::uint8_t> hit(n, 0);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Point3 p = pose.apply(a.points[k]);
    moved[k] = {p.x, p.y};
    double d = 0.0;
    if (index.nearest(moved[k], nearest[k], d) && d < max_corr) {
      dist[k] = d;
      hit[k] = 1;
    }
  }
  Association out;
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    total += dist[k];
    if (hit[k]) {
      out.src.push_back(moved[k]);
      out.dst.push_back(nearest[k]);
    }
  }
  out.residual = total / static_cast<double>(n);
  return out;
}

// Rigid pose (standard counter-clockwise convention) mapping src onto dst.
Pose2D fit_pose(const std::vector<Point2>& src, const std::vector<Point2>& dst) {
  const double n = static_cast<double>(src.size());
  Point2 pm;
  Point2 qm;
  for (std::size_t i = 0; i < src.size(); ++i) {
    pm.x += src[i].x;
    pm.y += src[i].y;
    qm.x += dst[i].x;
    qm.y += dst[i].y;
  }
  pm = {pm.x / n, pm.y / n};
  qm = {qm.x / n, qm.y / n};
  double dot = 0.0;
  double cross = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double px = src[i].x - pm.x;
    const double py = src[i].y - pm.y;
    const double qx = dst[i].x - qm.x;
    const double qy = dst[i].y - qm.y;
    dot += px * qx + py * qy;
    cross += px * qy - py * qx;
  }
  const double theta = std::atan2(cross, dot);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return Pose2D(qm.x - (c * pm.x - s * pm.y), qm.y - (s * pm.x + c * pm.y), theta);
}

void check_icp_inputs(const PointCloud& a, const PointCloud& b, double max_corr) {
  if (a.points.empty() || b.points.empty()) throw Error("ICP needs two non-empty clouds");
  if (!(max_corr > 0.0)) throw Error("ICP correspondence distance must be positive");
}

}  // namespace

double planar_residual(const PointCloud& a, const PointCloud& b, const Pose2D& pose, double max_correspondence) {
  check_icp_inputs(a, b, max_correspondence);
  const PlanarIndex index(b, max_correspondence);
  return associate(a, index, pose, max_correspondence).residual;
}

IcpResult icp_refine_planar(const PointCloud& a, const PointCloud& b, const Pose2D& init, const IcpParams& params) {
  check_icp_inputs(a, b, params.max_correspondence);
  if (params.max_iter < 0 || params.tolerance < 0.0) throw Error("bad ICP parameters");
  const PlanarIndex index(b, params.max_correspondence);
  IcpResult r;
  r.pose = init;
  Association cur = associate(a, index, init, params.max_correspondence);
  r.initial_residual = cur.residual;
  r.final_residual = cur.residual;
  for (int it = 0; it < params.max_iter; ++it) {
    if (cur.src.size() < 2) break;
    const Pose2D step = fit_pose(cur.src, cur.dst);
    const Pose2D next = step * r.pose;
    Association trial = associate(a, index, next, params.max_correspondence);
    if (trial.residual > cur.residual) break;
    const double change = cur.residual - trial.residual;
    r.pose = next;
    r.final_residual = trial.residual;
    ++r.iterations;
    cur = std::move(trial);
    if (change < params.tolerance) break;
  }
  return r;
}

}  // namespace bvmatch
