// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "bvmatch/bvft.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>

#include "binary_io.hpp"

namespace bvmatch {

void BvftConfig::validate(int orientations) const {
  if (!(fast_threshold > 0.0 && fast_threshold < 1.0)) throw Error("FAST threshold must lie in (0, 1)");
  if (patch_size < 2 || grid < 1 || patch_size % grid != 0) {
    throw Error("patch size must be a positive multiple of the sub-grid count");
  }
  if (orientations < 2 || orientations > 254) throw Error("orientation count out of range");
  if (noise_floor_factor < 0.0) throw Error("noise floor factor must be non-negative");
}

DominantOrientation dominant_orientation(const Mim& mim, const Keypoint& kp, int patch_size) {
  const int no = mim.orientations;
  const int lo = patch_size / 2;
  const double sigma = 0.5 * patch_size;
  const double denom = 2.0 * sigma * sigma;
  std::vector<double> hist(static_cast<std::size_t>(no), 0.0);
  bool any = false;
  for (int dv = -lo; dv < patch_size - lo; ++dv) {
    for (int du = -lo; du < patch_size - lo; ++du) {
      const int u = kp.u + du;
      const int v = kp.v + dv;
      if (!mim.index.contains(u, v) || !mim.valid(u, v)) continue;
      hist[mim.index(u, v)] += std::exp(-(du * du + dv * dv) / denom);
      any = true;
    }
  }
  if (!any) throw Error("no valid MIM pixel in keypoint patch");
  int best = 0;
  for (int o = 1; o < no; ++o) {
    if (hist[static_cast<std::size_t>(o)] > hist[static_cast<std::size_t>(best)]) best = o;
  }
  return {best, std::numbers::pi * best / no};
}

Grid<std::uint8_t> shift_patch(const Mim& mim, const Keypoint& kp, int dominant_index, double beta,
                               int patch_size) {
  const int no = mim.orientations;
  const int lo = patch_size / 2;
  const double c = std::cos(beta);
  const double s = std::sin(beta);
  Grid<std::uint8_t> patch(patch_size, patch_size, kInvalidLabel);
  for (int j = 0; j < patch_size; ++j) {
    const double dv = j - lo;
    for (int i = 0; i < patch_size; ++i) {
      const double du = i - lo;
      const auto u = static_cast<int>(std::lround(kp.u + du * c - dv * s));
      const auto v = static_cast<int>(std::lround(kp.v + du * s + dv * c));
      if (!mim.index.contains(u, v) || !mim.valid(u, v)) continue;
      patch(i, j) = static_cast<std::uint8_t>(((mim.index(u, v) - dominant_index) % no + no) % no);
    }
  }
  return patch;
}

std::vector<double> patch_histogram(const Grid<std::uint8_t>& patch, int grid, int orientations) {
  if (grid < 1 || patch.width() != patch.height() || patch.width() % grid != 0) {
    throw Error("patch side must be divisible by the sub-grid count");
  }
  const int cell = patch.width() / grid;
  std::vector<double> hist(static_cast<std::size_t>(grid * grid * orientations), 0.0);
  for (int j = 0; j < patch.height(); ++j) {
    for (int i = 0; i < patch.width(); ++i) {
      const int label = patch(i, j);
      if (label == kInvalidLabel) continue;
      if (label >= orientations) throw Error("patch label out of range");
      const int sub = (j / cell) * grid + (i / cell);
      hist[static_cast<std::size_t>(sub * orientations + label)] += 1.0;
    }
  }
  return hist;
}

std::vector<float> build_descriptor(const Grid<std::uint8_t>& patch, int grid, int orientations) {
  const std::vector<double> hist = patch_histogram(patch, grid, orientations);
  double norm2 = 0.0;
  for (double h : hist) norm2 += h * h;
  if (norm2 == 0.0) throw Error("patch has no valid pixel");
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(hist.size());
  for (std::size_t k = 0; k < hist.size(); ++k) out[k] = static_cast<float>(hist[k] * inv);
  return out;
}

namespace {

struct DescriptorPair {
  Descriptor primary;
  Descriptor flipped;
};

std::optional<DescriptorPair> describe_one(const Mim& mim, const Keypoint& kp, const BvftConfig& config) {
  if (!patch_fits(mim.width(), mim.height(), kp.u, kp.v, config.patch_size)) return std::nullopt;
  DominantOrientation dom;
  try {
    dom = dominant_orientation(mim, kp, config.patch_size);
  } catch (const Error&) {
    return std::nullopt;
  }
  const auto patch = shift_patch(mim, kp, dom.index, dom.beta, config.patch_size);
  const auto twin = shift_patch(mim, kp, dom.index, dom.beta + std::numbers::pi, config.patch_size);
  DescriptorPair pair;
  try {
    pair.primary.vector = build_descriptor(patch, config.grid, mim.orientations);
    pair.flipped.vector = build_descriptor(twin, config.grid, mim.orientations);
  } catch (const Error&) {
    return std::nullopt;
  }
  pair.primary.keypoint = kp;
  pair.primary.variant = DescriptorVariant::kPrimary;
  pair.primary.dominant_orientation = dom.beta;
  pair.flipped.keypoint = kp;
  pair.flipped.variant = DescriptorVariant::kPiFlipped;
  pair.flipped.dominant_orientation = normalize_angle(dom.beta + std::numbers::pi);
  return pair;
}

DescriptorSet collect(std::vector<std::optional<DescriptorPair>>& pairs) {
  DescriptorSet set;
  for (auto& p : pairs) {
    if (!p) continue;
    set.descriptors.push_back(std::move(p->primary));
    set.descriptors.push_back(std::move(p->flipped));
  }
  return set;
}

}  // namespace

DescriptorSet describe_keypoints(const Mim& mim, const std::vector<Keypoint>& keypoints,
                                 const BvftConfig& config) {
  config.validate(mim.orientations);
  std::vector<std::optional<DescriptorPair>> pairs(keypoints.size());
  const auto n = static_cast<long>(keypoints.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long k = 0; k < n; ++k) {
    pairs[static_cast<std::size_t>(k)] = describe_one(mim, keypoints[static_cast<std::size_t>(k)], config);
  }
  return collect(pairs);
}

namespace serial {

DescriptorSet describe_keypoints(const Mim& mim, const std::vector<Keypoint>& keypoints,
                                 const BvftConfig& config) {
  config.validate(mim.orientations);
  std::vector<std::optional<DescriptorPair>> pairs;
  pairs.reserve(keypoints.size());
  for (const auto& kp : keypoints) pairs.push_back(describe_one(mim, kp, config));
  return collect(pairs);
}

}  // namespace serial

DescriptorSet describe_frame(const BvImage& image, const FilterBank& bank, const BvftConfig& config) {
  config.validate(bank.params().orientations);
  const auto keypoints =
      detect_fast(image.intensity, config.fast_threshold, config.max_keypoints, config.patch_size);
  if (keypoints.empty()) return {};
  const Mim mim = image_mim(image.intensity, bank, config.noise_floor_factor);
  return describe_keypoints(mim, keypoints, config);
}

namespace {
constexpr char kMagic[5] = "BVFT";
constexpr std::uint16_t kVersion = 1;
}  // namespace

void write_descriptor_set(std::ostream& out, const DescriptorSet& set) {
  if (set.descriptors.size() % 2 != 0) throw Error("descriptor set must hold descriptor pairs");
  const std::size_t dim = set.dimension();
  io::put_magic(out, kMagic);
  io::put<std::uint16_t>(out, kVersion);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(set.keypoint_count()));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  for (const auto& d : set.descriptors) {
    if (d.vector.size() != dim) throw Error("descriptor dimensions differ within a set");
    if (d.keypoint.u < 0 || d.keypoint.v < 0 || d.keypoint.u > 0xFFFF || d.keypoint.v > 0xFFFF) {
      throw Error("keypoint coordinates exceed 16 bits");
    }
    io::put<std::uint16_t>(out, static_cast<std::uint16_t>(d.keypoint.u));
    io::put<std::uint16_t>(out, static_cast<std::uint16_t>(d.keypoint.v));
    io::put<std::uint8_t>(out, static_cast<std::uint8_t>(d.variant));
    for (float x : d.vector) io::put<float>(out, x);
  }
}

DescriptorSet read_descriptor_set(std::istream& in) {
  if (!io::check_magic(in, kMagic)) throw Error("not a BVFT record");
  const auto version = io::get<std::uint16_t>(in);
  if (version != kVersion) throw Error("unsupported BVFT version " + std::to_string(version));
  const auto keypoints = io::get<std::uint32_t>(in);
  const auto dim = io::get<std::uint32_t>(in);
  DescriptorSet set;
  set.descriptors.resize(2 * static_cast<std::size_t>(keypoints));
  for (auto& d : set.descriptors) {
    d.keypoint.u = io::get<std::uint16_t>(in);
    d.keypoint.v = io::get<std::uint16_t>(in);
    const auto variant = io::get<std::uint8_t>(in);
    if (variant > 1) throw Error("bad descriptor variant flag");
    d.variant = static_cast<DescriptorVariant>(variant);
    d.vector.resize(dim);
    for (auto& x : d.vector) x = io::get<float>(in);
  }
  return set;
}

void save_descriptor_set(const DescriptorSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_descriptor_set(out, set);
  if (!out) throw Error("write failed: " + path.string());
}

DescriptorSet load_descriptor_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    DescriptorSet set = read_descriptor_set(in);
    set.frame_id = path.stem().string();
    return set;
  } catch (const io::Truncated&) {
    throw Error(path.string() + ": truncated descriptor record");
  }
}

bool same_descriptors(const DescriptorSet& a, const DescriptorSet& b) {
  if (a.descriptors.size() != b.descriptors.size()) return false;
  for (std::size_t i = 0; i < a.descriptors.size(); ++i) {
    const auto& x = a.descriptors[i];
    const auto& y = b.descriptors[i];
    if (x.keypoint.u != y.keypoint.u || x.keypoint.v != y.keypoint.v || x.variant != y.variant ||
        x.vector.size() != y.vector.size()) {
      return false;
    }
    for (std::size_t k = 0; k < x.vector.size(); ++k) {
      if (std::bit_cast<std::uint32_t>(x.vector[k]) != std::bit_cast<std::uint32_t>(y.vector[k])) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace bvmatch
