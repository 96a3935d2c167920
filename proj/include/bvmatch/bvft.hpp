// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// BVFT local descriptors.
//
// FAST keypoints are found on the BV image. Around each keypoint a J x J
// window of the maximum index map is summarized by a Gaussian-weighted
// orientation histogram; its peak o_m gives the dominant orientation
// beta = pi * o_m / No. The window is resampled rotated by beta, every label
// is shifted by -o_m (mod No) and l x l sub-grid histograms of the labels
// form the descriptor. Because labels repeat with period pi, every keypoint
// also gets a twin descriptor sampled with beta + pi.

#ifndef BVMATCH_BVFT_HPP_
#define BVMATCH_BVFT_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bvmatch/bvimage.hpp"
#include "bvmatch/common.hpp"
#include "bvmatch/loggabor.hpp"

namespace bvmatch {

struct Keypoint {
  int u = 0;
  int v = 0;
  double score = 0.0;

  bool operator==(const Keypoint&) const = default;
};

enum class DescriptorVariant : std::uint8_t { kPrimary = 0, kPiFlipped = 1 };

struct Descriptor {
  std::vector<float> vector;
  Keypoint keypoint;
  DescriptorVariant variant = DescriptorVariant::kPrimary;
  double dominant_orientation = 0.0;  // radians
};

/// Descriptors come in (primary, pi-flipped) pairs sharing a keypoint.
struct DescriptorSet {
  std::string frame_id;
  std::vector<Descriptor> descriptors;

  std::size_t keypoint_count() const { return descriptors.size() / 2; }
  std::size_t dimension() const { return descriptors.empty() ? 0 : descriptors.front().vector.size(); }
};

struct BvftConfig {
  double fast_threshold = 0.06;
  int max_keypoints = 500;
  int patch_size = 96;  // J
  int grid = 6;         // l
  double noise_floor_factor = kDefaultNoiseFloorFactor;

  void validate(int orientations) const;
};

/// Label marking a patch pixel whose source is invalid or outside the map.
inline constexpr std::uint8_t kInvalidLabel = 0xFF;

/// FAST-9 on the 16-pixel circle, 3x3 non-maximum suppression on the score,
/// keypoints whose patch_size window leaves the image dropped, then the best
/// max_keypoints by score (ties by row, then column).
std::vector<Keypoint> detect_fast(const Grid<double>& image, double threshold, int max_keypoints,
                                  int patch_size);

/// Segment-test score of one pixel, or 0 when it is not a FAST-9 corner.
double fast_score(const Grid<double>& image, int u, int v, double threshold);

/// True when the J x J window centered at the keypoint lies inside the image.
/// The window spans offsets [-J/2, J - 1 - J/2] on both axes.
bool patch_fits(int width, int height, int u, int v, int patch_size);

struct DominantOrientation {
  int index = 0;      // o_m
  double beta = 0.0;  // pi * o_m / No
};

/// Peak of the Gaussian-weighted (sigma = J/2) histogram of valid labels.
/// Throws Error when the window holds no valid pixel.
DominantOrientation dominant_orientation(const Mim& mim, const Keypoint& kp, int patch_size);

/// Labels sampled at keypoint + R(beta) * offset (nearest neighbour), then
/// shifted by -o_m modulo No. Invalid sources yield kInvalidLabel.
Grid<std::uint8_t> shift_patch(const Mim& mim, const Keypoint& kp, int dominant_index, double beta,
                               int patch_size);

/// Raw per-sub-grid label counts, sub-grid-major (row-major), label-minor.
std::vector<double> patch_histogram(const Grid<std::uint8_t>& patch, int grid, int orientations);

/// L2-normalized patch_histogram. Throws Error when every pixel is invalid.
std::vector<float> build_descriptor(const Grid<std::uint8_t>& patch, int grid, int orientations);

/// Describes the given keypoints on a precomputed MIM; keypoints whose
/// window has no valid pixel are skipped.
DescriptorSet describe_keypoints(const Mim& mim, const std::vector<Keypoint>& keypoints,
                                 const BvftConfig& config);

/// detect -> MIM -> per-keypoint descriptor pairs.
DescriptorSet describe_frame(const BvImage& image, const FilterBank& bank, const BvftConfig& config);

namespace serial {

DescriptorSet describe_keypoints(const Mim& mim, const std::vector<Keypoint>& keypoints,
                                 const BvftConfig& config);

}  // namespace serial

/// Binary record: "BVFT", u16 version, u32 keypoint count, u32 dimension, then
/// per descriptor u16 u, u16 v, u8 variant and dimension f32 values (LE).
void write_descriptor_set(std::ostream& out, const DescriptorSet& set);
DescriptorSet read_descriptor_set(std::istream& in);

void save_descriptor_set(const DescriptorSet& set, const std::filesystem::path& path);
DescriptorSet load_descriptor_set(const std::filesystem::path& path);

/// Same keypoints, variants and bit-identical vectors.
bool same_descriptors(const DescriptorSet& a, const DescriptorSet& b);

}  // namespace bvmatch

#endif  // BVMATCH_BVFT_HPP_
