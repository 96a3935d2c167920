// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "bvmatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "bvmatch/common.hpp"

namespace bvmatch {
namespace {

double segment_distance(double px, double py, const Facade& f) {
  const double dx = f.x1 - f.x0;
  const double dy = f.y1 - f.y0;
  const double len2 = dx * dx + dy * dy;
  double t = ((px - f.x0) * dx + (py - f.y0) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (f.x0 + t * dx), py - (f.y0 + t * dy));
}

void validate(const SceneSpec& spec) {
  if (spec.poles.empty() && spec.facades.empty() && !spec.ground) {
    throw Error("degenerate scene: no structures");
  }
  for (const auto& p : spec.poles) {
    if (!(p.height > 0.0) || p.radius < 0.0) throw Error("degenerate scene: bad pole extent");
  }
  for (const auto& f : spec.facades) {
    if (!(f.height > 0.0) || std::hypot(f.x1 - f.x0, f.y1 - f.y0) <= 0.0) {
      throw Error("degenerate scene: zero-extent facade");
    }
  }
  if (!spec.poles.empty() && !(spec.pole_density > 0.0)) {
    throw Error("degenerate scene: pole density must be positive");
  }
  if (!spec.facades.empty() && !(spec.facade_density > 0.0)) {
    throw Error("degenerate scene: facade density must be positive");
  }
  if (spec.ground && !(spec.ground_radius > 0.0 && spec.ground_density > 0.0)) {
    throw Error("degenerate scene: zero-extent ground");
  }
  if (spec.noise_sigma < 0.0 || spec.clutter_fraction < 0.0 || spec.clutter_fraction >= 1.0 ||
      spec.max_range < 0.0) {
    throw Error("invalid scene noise parameters");
  }
}

}  // namespace

PointCloud synth_scene(std::uint64_t seed, const SceneSpec& spec) {
  validate(spec);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  const double sx = spec.sensor.tx;
  const double sy = spec.sensor.ty;
  const double range = spec.max_range;

  std::vector<Point3> world;
  for (const auto& pole : spec.poles) {
    if (range > 0.0 && std::hypot(pole.x - sx, pole.y - sy) > range + pole.radius) continue;
    // Stratified heights keep the per-meter density exact up to one point.
    const auto n = std::max<long>(1, std::lround(spec.pole_density * pole.height));
    for (long i = 0; i < n; ++i) {
      const double z = (static_cast<double>(i) + unit(rng)) * pole.height / static_cast<double>(n);
      const double a = kTwoPi * unit(rng);
      world.push_back({pole.x + pole.radius * std::cos(a), pole.y + pole.radius * std::sin(a), z});
    }
  }
  for (const auto& f : spec.facades) {
    if (range > 0.0 && segment_distance(sx, sy, f) > range) continue;
    const double len = std::hypot(f.x1 - f.x0, f.y1 - f.y0);
    const auto n = std::max<long>(1, std::lround(spec.facade_density * len * f.height));
    for (long i = 0; i < n; ++i) {
      const double t = unit(rng);
      const double z = f.height * unit(rng);
      world.push_back({f.x0 + t * (f.x1 - f.x0), f.y0 + t * (f.y1 - f.y0), z});
    }
  }
  if (spec.ground) {
    const double r_max = spec.ground_radius;
    const auto n = std::lround(spec.ground_density * std::numbers::pi * r_max * r_max);
    for (long i = 0; i < n; ++i) {
      const double r = r_max * std::sqrt(unit(rng));
      const double a = kTwoPi * unit(rng);
      world.push_back({sx + r * std::cos(a), sy + r * std::sin(a), 0.0});
    }
  }

  const Pose2D to_sensor = spec.sensor.inverse();
  PointCloud cloud;
  cloud.pose = spec.sensor;
  cloud.points.reserve(world.size());
  std::normal_distribution<double> jitter(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
  for (const auto& w : world) {
    Point3 p = to_sensor.apply(w);
    if (spec.noise_sigma > 0.0) {
      p.x += jitter(rng);
      p.y += jitter(rng);
      p.z += jitter(rng);
    }
    if (range > 0.0 && std::hypot(p.x, p.y) > range) continue;
    cloud.points.push_back(p);
  }

  if (spec.clutter_fraction > 0.0 && !cloud.points.empty()) {
    double half = range;
    if (!(half > 0.0)) {
      for (const auto& p : cloud.points) half = std::max({half, std::abs(p.x), std::abs(p.y)});
    }
    const auto n = std::lround(spec.clutter_fraction / (1.0 - spec.clutter_fraction) *
                               static_cast<double>(cloud.points.size()));
    for (long i = 0; i < n; ++i) {
      cloud.points.push_back({half * (2.0 * unit(rng) - 1.0), half * (2.0 * unit(rng) - 1.0),
                              3.0 * unit(rng)});
    }
  }
  return cloud;
}

SceneSpec random_urban_scene(std::uint64_t seed, const UrbanLayout& layout) {
  const double width = layout.x_max - layout.x_min;
  const double depth = layout.y_max - layout.y_min;
  if (!(width > 0.0 && depth > 0.0)) throw Error("degenerate urban layout extent");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double area_km2 = width * depth * 1e-6;
  const auto buildings = std::lround(layout.buildings_per_km2 * area_km2);
  const auto poles = std::lround(layout.poles_per_km2 * area_km2);

  SceneSpec spec;
  for (long i = 0; i < buildings; ++i) {
    const double cx = uniform(layout.x_min, layout.x_max);
    const double cy = uniform(layout.y_min, layout.y_max);
    const double hw = 0.5 * uniform(layout.building_min_side, layout.building_max_side);
    const double hd = 0.5 * uniform(layout.building_min_side, layout.building_max_side);
    const double yaw = uniform(0.0, std::numbers::pi);
    const double h = uniform(layout.building_min_height, layout.building_max_height);
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    const double corners[4][2] = {{-hw, -hd}, {hw, -hd}, {hw, hd}, {-hw, hd}};
    for (int k = 0; k < 4; ++k) {
      const auto& a = corners[k];
      const auto& b = corners[(k + 1) % 4];
      spec.facades.push_back({cx + c * a[0] - s * a[1], cy + s * a[0] + c * a[1],
                              cx + c * b[0] - s * b[1], cy + s * b[0] + c * b[1], h});
    }
  }
  for (long i = 0; i < poles; ++i) {
    spec.poles.push_back({uniform(layout.x_min, layout.x_max), uniform(layout.y_min, layout.y_max),
                          uniform(0.05, 0.2), uniform(layout.pole_min_height, layout.pole_max_height)});
  }
  return spec;
}

}  // namespace bvmatch
