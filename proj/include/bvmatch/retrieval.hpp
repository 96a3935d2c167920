// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bag-of-words place retrieval: k-means dictionary over BVFT descriptors,
// TF-IDF global descriptors and a persisted keyframe database.

#ifndef BVMATCH_RETRIEVAL_HPP_
#define BVMATCH_RETRIEVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "bvmatch/bvft.hpp"
#include "bvmatch/pointcloud.hpp"

namespace bvmatch {

/// Row-major float matrix of descriptors.
struct DescriptorMatrix {
  int dim = 0;
  std::vector<float> data;

  std::size_t rows() const { return dim == 0 ? 0 : data.size() / static_cast<std::size_t>(dim); }
  const float* row(std::size_t i) const { return data.data() + i * static_cast<std::size_t>(dim); }
  void append(const std::vector<float>& v);
};

/// Every descriptor of every set, in order.
DescriptorMatrix stack_descriptors(const std::vector<DescriptorSet>& sets);

/// At most max_rows rows drawn without replacement (order preserved).
DescriptorMatrix subsample_rows(const DescriptorMatrix& m, std::size_t max_rows, std::uint64_t seed);

struct Dictionary {
  int words = 0;
  int dim = 0;
  std::vector<float> centroids;  // words x dim
  int iterations = 0;
  double inertia = 0.0;

  const float* centroid(int w) const { return centroids.data() + static_cast<std::size_t>(w) * dim; }
};

/// k-means++ seeding and Lloyd iterations until the largest centroid shift
/// drops below 1e-4 or max_iter. Empty clusters take the point farthest from
/// its centroid. history, when given, receives the inertia of every
/// assignment step.
Dictionary train_dictionary(const DescriptorMatrix& descriptors, int words, int max_iter, std::uint64_t seed,
                            std::vector<double>* history = nullptr);

/// Nearest centroid (ties to the smallest index).
int nearest_word(const Dictionary& dict, const float* x);

using WordHistogram = std::vector<std::uint32_t>;

WordHistogram quantize(const DescriptorSet& set, const Dictionary& dict);

/// idf[w] = ln(N / n_w), 0 for words no document contains.
std::vector<double> compute_idf(const std::vector<WordHistogram>& corpus);

struct GlobalDescriptor {
  std::vector<double> weights;  // unit norm, or all zero for an empty frame
};

GlobalDescriptor global_descriptor(const WordHistogram& hist, const std::vector<double>& idf);

double global_distance(const GlobalDescriptor& a, const GlobalDescriptor& b);

struct KeyframeEntry {
  std::string frame_id;
  Pose2D pose;
  GlobalDescriptor global;
  DescriptorSet local;
};

struct KeyframeDb {
  Dictionary dictionary;
  std::vector<double> idf;
  std::vector<KeyframeEntry> entries;
  double spacing = 10.0;  // S, meters
};

/// Greedy spacing rule: the first pose is a keyframe, and a later pose is one
/// when its translation lies at least spacing meters from the last keyframe.
std::vector<std::size_t> select_keyframes(const std::vector<Pose2D>& poses, double spacing);

using Describer = std::function<DescriptorSet(const PointCloud&)>;

/// Keyframe selection, description (in parallel), quantization, idf over the
/// keyframes and global descriptors. Entries are ordered by frame_id.
/// Throws Error when a frame has no pose.
KeyframeDb build_database(const std::vector<PointCloud>& frames, double spacing, const Dictionary& dict,
                          const Describer& describe);

/// Same, for keyframes that are already described.
KeyframeDb build_database(std::vector<KeyframeEntry> keyframes, double spacing, const Dictionary& dict);

struct QueryHit {
  std::size_t index = 0;  // entry index
  std::string frame_id;
  double distance = 0.0;
};

/// The n nearest entries by Euclidean distance (ties by frame_id).
std::vector<QueryHit> query(const KeyframeDb& db, const GlobalDescriptor& q, int n);

/// Global descriptor of a new frame under the database's dictionary and idf.
GlobalDescriptor describe_global(const KeyframeDb& db, const DescriptorSet& set);

/// Binary "BVDC" dictionary file.
void save_dictionary(const Dictionary& dict, const std::filesystem::path& path);
Dictionary load_dictionary(const std::filesystem::path& path);

/// Binary "BVDB" database file.
void write_db(std::ostream& out, const KeyframeDb& db);
KeyframeDb read_db(std::istream& in);
void save_db(const KeyframeDb& db, const std::filesystem::path& path);
KeyframeDb load_db(const std::filesystem::path& path);

/// Bit-exact comparison of dictionaries, idf, poses, ids and descriptors.
bool same_database(const KeyframeDb& a, const KeyframeDb& b);

namespace serial {

Dictionary train_dictionary(const DescriptorMatrix& descriptors, int words, int max_iter, std::uint64_t seed,
                            std::vector<double>* history = nullptr);

}  // namespace serial

}  // namespace bvmatch

#endif  // BVMATCH_RETRIEVAL_HPP_
