// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic road-scene generator. Scenes are made of vertical poles, vertical
// facades and an optional ground disc; after projection the poles become
// blobs and the facades become line segments in the BV image.

#ifndef BVMATCH_SYNTH_HPP_
#define BVMATCH_SYNTH_HPP_

#include <cstdint>
#include <vector>

#include "bvmatch/pointcloud.hpp"

namespace bvmatch {

struct Pole {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
  double height = 5.0;
};

/// Vertical wall between (x0, y0) and (x1, y1), from z = 0 up to height.
struct Facade {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
  double height = 8.0;
};

struct SceneSpec {
  std::vector<Pole> poles;
  std::vector<Facade> facades;

  bool ground = false;
  double ground_radius = 50.0;   // meters around the sensor
  double ground_density = 8.0;   // points per m^2

  double pole_density = 30.0;    // points per meter of pole height
  double facade_density = 10.0;  // points per m^2 of wall

  double noise_sigma = 0.0;       // isotropic Gaussian jitter, meters
  double clutter_fraction = 0.0;  // share of output points that are uniform clutter

  /// World pose of the sensor. Output points are expressed in the sensor frame.
  Pose2D sensor;
  /// Planar range limit around the sensor; 0 disables it.
  double max_range = 0.0;
};

/// Samples a cloud from the scene. Deterministic for a fixed seed; throws
/// Error when the SceneSpec is degenerate (no structures, zero extents).
PointCloud synth_scene(std::uint64_t seed, const SceneSpec& spec);

/// Layout of a random urban block: rectangular buildings and poles placed
/// uniformly inside [x_min, x_max] x [y_min, y_max].
struct UrbanLayout {
  double x_min = -45.0;
  double x_max = 45.0;
  double y_min = -45.0;
  double y_max = 45.0;
  double buildings_per_km2 = 2500.0;
  double poles_per_km2 = 2000.0;
  double building_min_side = 4.0;
  double building_max_side = 16.0;
  double building_min_height = 5.0;
  double building_max_height = 12.0;
  double pole_min_height = 3.0;
  double pole_max_height = 8.0;
};

/// Draws the structures of a random urban layout (poles and building
/// facades); the density and noise fields of the result keep their defaults.
SceneSpec random_urban_scene(std::uint64_t seed, const UrbanLayout& layout);

}  // namespace bvmatch

#endif  // BVMATCH_SYNTH_HPP_
