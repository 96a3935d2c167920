// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "bvmatch/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "binary_io.hpp"

namespace bvmatch {

void DescriptorMatrix::append(const std::vector<float>& v) {
  if (dim == 0) dim = static_cast<int>(v.size());
  if (v.size() != static_cast<std::size_t>(dim)) throw Error("descriptor dimension mismatch");
  data.insert(data.end(), v.begin(), v.end());
}

DescriptorMatrix stack_descriptors(const std::vector<DescriptorSet>& sets) {
  DescriptorMatrix m;
  for (const auto& s : sets) {
    for (const auto& d : s.descriptors) m.append(d.vector);
  }
  return m;
}

DescriptorMatrix subsample_rows(const DescriptorMatrix& m, std::size_t max_rows, std::uint64_t seed) {
  const std::size_t n = m.rows();
  if (n <= max_rows) return m;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates with an explicit draw so the result does not depend
  // on the standard library's shuffle.
  for (std::size_t i = 0; i < max_rows; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  DescriptorMatrix out;
  out.dim = m.dim;
  out.data.reserve(max_rows * static_cast<std::size_t>(m.dim));
  for (std::size_t i : idx) out.data.insert(out.data.end(), m.row(i), m.row(i) + m.dim);
  return out;
}

namespace {

template <typename A, typename B>
double squared_distance(const A* x, const B* y, int dim) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  int k = 0;
  for (; k + 4 <= dim; k += 4) {
    for (int r = 0; r < 4; ++r) {
      const double d = static_cast<double>(x[k + r]) - static_cast<double>(y[k + r]);
      acc[r] += d * d;
    }
  }
  for (; k < dim; ++k) {
    const double d = static_cast<double>(x[k]) - static_cast<double>(y[k]);
    acc[0] += d * d;
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

// Index of the first centroid at minimum distance, and that distance.
template <typename C>
std::pair<int, double> nearest(const float* x, const C* centroids, int words, int dim) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int w = 0; w < words; ++w) {
    const double d = squared_distance(x, centroids + static_cast<std::size_t>(w) * dim, dim);
    if (d < best_d) {
      best_d = d;
      best = w;
    }
  }
  return {best, best_d};
}

std::vector<double> plus_plus_seeds(const DescriptorMatrix& m, int words, std::mt19937_64& rng) {
  const std::size_t n = m.rows();
  const auto dim = static_cast<std::size_t>(m.dim);
  std::vector<double> c(static_cast<std::size_t>(words) * dim);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t chosen = pick(rng);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (int w = 0; w < words; ++w) {
    std::copy(m.row(chosen), m.row(chosen) + dim, c.begin() + static_cast<std::ptrdiff_t>(w * dim));
    if (w + 1 == words) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(m.row(i), c.data() + w * dim, m.dim));
      total += d2[i];
    }
    if (total <= 0.0) {
      chosen = pick(rng);
      continue;
    }
    const double r = unit(rng) * total;
    double cum = 0.0;
    std::size_t last_positive = 0;
    chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      last_positive = i;
      cum += d2[i];
      if (cum > r) {
        chosen = i;
        break;
      }
    }
    if (chosen == n) chosen = last_positive;
  }
  return c;
}

Dictionary kmeans(const DescriptorMatrix& m, int words, int max_iter, std::uint64_t seed,
                  std::vector<double>* history, bool parallel) {
  if (words < 1) throw Error("dictionary needs at least one word");
  if (m.dim < 1 || m.rows() < static_cast<std::size_t>(words)) {
    throw Error("descriptor count " + std::to_string(m.rows()) + " is below the word count " +
                std::to_string(words));
  }
  if (max_iter < 1) throw Error("k-means needs at least one iteration");
  const std::size_t n = m.rows();
  const int dim = m.dim;
  const auto udim = static_cast<std::size_t>(dim);
  std::mt19937_64 rng(seed);
  std::vector<double> c = plus_plus_seeds(m, words, rng);

  std::vector<int> label(n);
  std::vector<double> dist(n);
  auto assign = [&]() {
    const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (parallel)
    for (long i = 0; i < count; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const auto [w, d] = nearest(m.row(k), c.data(), words, dim);
      label[k] = w;
      dist[k] = d;
    }
    double inertia = 0.0;
    for (double d : dist) inertia += d;
    if (history) history->push_back(inertia);
    return inertia;
  };

  constexpr double kShiftTolerance = 1e-4;
  int it = 0;
  std::vector<double> sums(c.size());
  std::vector<std::size_t> counts(static_cast<std::size_t>(words));
  while (it < max_iter) {
    ++it;
    assign();
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto w = static_cast<std::size_t>(label[i]);
      ++counts[w];
      const float* x = m.row(i);
      double* s = sums.data() + w * udim;
      for (std::size_t k = 0; k < udim; ++k) s[k] += x[k];
    }
    double shift = 0.0;
    for (std::size_t w = 0; w < counts.size(); ++w) {
      double* cw = c.data() + w * udim;
      std::vector<double> next(udim);
      if (counts[w] == 0) {
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy(m.row(far), m.row(far) + udim, next.begin());
        dist[far] = -1.0;
      } else {
        for (std::size_t k = 0; k < udim; ++k) next[k] = sums[w * udim + k] / static_cast<double>(counts[w]);
      }
      double moved = 0.0;
      for (std::size_t k = 0; k < udim; ++k) {
        const double d = next[k] - cw[k];
        moved += d * d;
        cw[k] = next[k];
      }
      shift = std::max(shift, std::sqrt(moved));
    }
    if (shift < kShiftTolerance) break;
  }
  const double inertia = assign();

  Dictionary dict;
  dict.words = words;
  dict.dim = dim;
  dict.iterations = it;
  dict.inertia = inertia;
  dict.centroids.assign(c.begin(), c.end());
  return dict;
}

}  // namespace

Dictionary train_dictionary(const DescriptorMatrix& descriptors, int words, int max_iter, std::uint64_t seed,
                            std::vector<double>* history) {
  return kmeans(descriptors, words, max_iter, seed, history, true);
}

namespace serial {

Dictionary train_dictionary(const DescriptorMatrix& descriptors, int words, int max_iter, std::uint64_t seed,
                            std::vector<double>* history) {
  return kmeans(descriptors, words, max_iter, seed, history, false);
}

}  // namespace serial

int nearest_word(const Dictionary& dict, const float* x) {
  return nearest(x, dict.centroids.data(), dict.words, dict.dim).first;
}

WordHistogram quantize(const DescriptorSet& set, const Dictionary& dict) {
  WordHistogram h(static_cast<std::size_t>(dict.words), 0);
  for (const auto& d : set.descriptors) {
    if (d.vector.size() != static_cast<std::size_t>(dict.dim)) {
      throw Error("descriptor dimension " + std::to_string(d.vector.size()) + " does not match dictionary " +
                  std::to_string(dict.dim));
    }
    ++h[static_cast<std::size_t>(nearest_word(dict, d.vector.data()))];
  }
  return h;
}

std::vector<double> compute_idf(const std::vector<WordHistogram>& corpus) {
  if (corpus.empty()) throw Error("empty corpus");
  const std::size_t b = corpus.front().size();
  std::vector<std::size_t> df(b, 0);
  for (const auto& h : corpus) {
    if (h.size() != b) throw Error("histogram lengths differ within the corpus");
    for (std::size_t w = 0; w < b; ++w) df[w] += h[w] > 0 ? 1 : 0;
  }
  const double n = static_cast<double>(corpus.size());
  std::vector<double> idf(b, 0.0);
  for (std::size_t w = 0; w < b; ++w) {
    if (df[w] > 0) idf[w] = std::log(n / static_cast<double>(df[w]));
  }
  return idf;
}

GlobalDescriptor global_descriptor(const WordHistogram& hist, const std::vector<double>& idf) {
  if (hist.size() != idf.size()) throw Error("histogram and idf lengths differ");
  GlobalDescriptor g;
  g.weights.assign(hist.size(), 0.0);
  double total = 0.0;
  for (auto c : hist) total += c;
  if (total == 0.0) return g;
  double norm2 = 0.0;
  for (std::size_t w = 0; w < hist.size(); ++w) {
    g.weights[w] = hist[w] / total * idf[w];
    norm2 += g.weights[w] * g.weights[w];
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : g.weights) x *= inv;
  }
  return g;
}

double global_distance(const GlobalDescriptor& a, const GlobalDescriptor& b) {
  if (a.weights.size() != b.weights.size()) throw Error("global descriptor lengths differ");
  double s = 0.0;
  for (std::size_t w = 0; w < a.weights.size(); ++w) {
    const double d = a.weights[w] - b.weights[w];
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<std::size_t> select_keyframes(const std::vector<Pose2D>& poses, double spacing) {
  if (!(spacing >= 0.0)) throw Error("keyframe spacing must be non-negative");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (out.empty()) {
      out.push_back(i);
      continue;
    }
    const Pose2D& last = poses[out.back()];
    if (std::hypot(poses[i].tx - last.tx, poses[i].ty - last.ty) >= spacing) out.push_back(i);
  }
  return out;
}

KeyframeDb build_database(std::vector<KeyframeEntry> keyframes, double spacing, const Dictionary& dict) {
  if (dict.words < 1) throw Error("database needs a trained dictionary");
  std::stable_sort(keyframes.begin(), keyframes.end(),
                   [](const KeyframeEntry& a, const KeyframeEntry& b) { return a.frame_id < b.frame_id; });
  KeyframeDb db;
  db.dictionary = dict;
  db.spacing = spacing;
  std::vector<WordHistogram> hists(keyframes.size());
  const long n = static_cast<long>(keyframes.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    hists[static_cast<std::size_t>(i)] = quantize(keyframes[static_cast<std::size_t>(i)].local, dict);
  }
  db.idf = keyframes.empty() ? std::vector<double>(static_cast<std::size_t>(dict.words), 0.0) : compute_idf(hists);
  for (std::size_t i = 0; i < keyframes.size(); ++i) keyframes[i].global = global_descriptor(hists[i], db.idf);
  db.entries = std::move(keyframes);
  return db;
}

KeyframeDb build_database(const std::vector<PointCloud>& frames, double spacing, const Dictionary& dict,
                          const Describer& describe) {
  std::vector<Pose2D> poses;
  poses.reserve(frames.size());
  for (const auto& f : frames) {
    if (!f.pose) throw Error("frame '" + f.frame_id + "' has no pose");
    poses.push_back(*f.pose);
  }
  const auto selected = select_keyframes(poses, spacing);
  std::vector<KeyframeEntry> keyframes(selected.size());
  const long n = static_cast<long>(selected.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const PointCloud& f = frames[selected[k]];
    keyframes[k].frame_id = f.frame_id;
    keyframes[k].pose = *f.pose;
    keyframes[k].local = describe(f);
    keyframes[k].local.frame_id = f.frame_id;
  }
  return build_database(std::move(keyframes), spacing, dict);
}

std::vector<QueryHit> query(const KeyframeDb& db, const GlobalDescriptor& q, int n) {
  if (db.entries.empty()) throw Error("empty database");
  if (n < 1) throw Error("query needs n >= 1");
  std::vector<QueryHit> hits;
  hits.reserve(db.entries.size());
  for (std::size_t i = 0; i < db.entries.size(); ++i) {
    hits.push_back({i, db.entries[i].frame_id, global_distance(db.entries[i].global, q)});
  }
  const auto keep = std::min(hits.size(), static_cast<std::size_t>(n));
  auto before = [](const QueryHit& a, const QueryHit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.frame_id != b.frame_id) return a.frame_id < b.frame_id;
    return a.index < b.index;
  };
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), before);
  hits.resize(keep);
  return hits;
}

GlobalDescriptor describe_global(const KeyframeDb& db, const DescriptorSet& set) {
  return global_descriptor(quantize(set, db.dictionary), db.idf);
}

namespace {

constexpr char kDictMagic[5] = "BVDC";
constexpr char kDbMagic[5] = "BVDB";
constexpr std::uint16_t kDictVersion = 1;
constexpr std::uint16_t kDbVersion = 1;

void write_centroids(std::ostream& out, const Dictionary& dict) {
  for (float x : dict.centroids) io::put<float>(out, x);
}

void read_centroids(std::istream& in, Dictionary& dict) {
  dict.centroids.resize(static_cast<std::size_t>(dict.words) * static_cast<std::size_t>(dict.dim));
  for (float& x : dict.centroids) x = io::get<float>(in);
}

}  // namespace

void save_dictionary(const Dictionary& dict, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  io::put_magic(out, kDictMagic);
  io::put<std::uint16_t>(out, kDictVersion);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(dict.words));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(dict.dim));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(dict.iterations));
  io::put<double>(out, dict.inertia);
  write_centroids(out, dict);
  if (!out) throw Error("write failed: " + path.string());
}

Dictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  if (!io::check_magic(in, kDictMagic)) throw Error(path.string() + ": not a BVDC dictionary file");
  try {
    const auto version = io::get<std::uint16_t>(in);
    if (version != kDictVersion) throw Error("unsupported BVDC version " + std::to_string(version));
    Dictionary dict;
    dict.words = static_cast<int>(io::get<std::uint32_t>(in));
    dict.dim = static_cast<int>(io::get<std::uint32_t>(in));
    dict.iterations = static_cast<int>(io::get<std::uint32_t>(in));
    dict.inertia = io::get<double>(in);
    read_centroids(in, dict);
    return dict;
  } catch (const io::Truncated&) {
    throw Error(path.string() + ": truncated dictionary");
  }
}

void write_db(std::ostream& out, const KeyframeDb& db) {
  const Dictionary& d = db.dictionary;
  if (db.idf.size() != static_cast<std::size_t>(d.words)) throw Error("idf length differs from word count");
  io::put_magic(out, kDbMagic);
  io::put<std::uint16_t>(out, kDbVersion);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(d.words));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(d.dim));
  write_centroids(out, d);
  for (double x : db.idf) io::put<double>(out, x);
  io::put<double>(out, db.spacing);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(d.iterations));
  io::put<double>(out, d.inertia);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(db.entries.size()));
  for (const auto& e : db.entries) {
    if (e.global.weights.size() != static_cast<std::size_t>(d.words)) {
      throw Error("global descriptor length differs from word count");
    }
    io::put_string(out, e.frame_id);
    io::put<double>(out, e.pose.tx);
    io::put<double>(out, e.pose.ty);
    io::put<double>(out, e.pose.theta);
    for (double x : e.global.weights) io::put<double>(out, x);
    write_descriptor_set(out, e.local);
  }
}

KeyframeDb read_db(std::istream& in) {
  if (!io::check_magic(in, kDbMagic)) throw Error("not a BVDB file");
  KeyframeDb db;
  std::uint32_t count = 0;
  try {
    const auto version = io::get<std::uint16_t>(in);
    if (version != kDbVersion) throw Error("unsupported BVDB version " + std::to_string(version));
    Dictionary& d = db.dictionary;
    d.words = static_cast<int>(io::get<std::uint32_t>(in));
    d.dim = static_cast<int>(io::get<std::uint32_t>(in));
    read_centroids(in, d);
    db.idf.resize(static_cast<std::size_t>(d.words));
    for (double& x : db.idf) x = io::get<double>(in);
    db.spacing = io::get<double>(in);
    d.iterations = static_cast<int>(io::get<std::uint32_t>(in));
    d.inertia = io::get<double>(in);
    count = io::get<std::uint32_t>(in);
  } catch (const io::Truncated&) {
    throw Error("truncated database header");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    try {
      KeyframeEntry e;
      e.frame_id = io::get_string(in);
      const double tx = io::get<double>(in);
      const double ty = io::get<double>(in);
      const double theta = io::get<double>(in);
      e.pose.tx = tx;
      e.pose.ty = ty;
      e.pose.theta = theta;
      e.global.weights.resize(static_cast<std::size_t>(db.dictionary.words));
      for (double& x : e.global.weights) x = io::get<double>(in);
      e.local = read_descriptor_set(in);
      e.local.frame_id = e.frame_id;
      db.entries.push_back(std::move(e));
    } catch (const io::Truncated&) {
      throw Error("truncated database at entry " + std::to_string(i));
    }
  }
  return db;
}

void save_db(const KeyframeDb& db, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_db(out, db);
  if (!out) throw Error("write failed: " + path.string());
}

KeyframeDb load_db(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return read_db(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

namespace {

template <typename T>
bool bits_equal(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

bool same_pose(const Pose2D& a, const Pose2D& b) {
  return std::bit_cast<std::uint64_t>(a.tx) == std::bit_cast<std::uint64_t>(b.tx) &&
         std::bit_cast<std::uint64_t>(a.ty) == std::bit_cast<std::uint64_t>(b.ty) &&
         std::bit_cast<std::uint64_t>(a.theta) == std::bit_cast<std::uint64_t>(b.theta);
}

}  // namespace

bool same_database(const KeyframeDb& a, const KeyframeDb& b) {
  const Dictionary& da = a.dictionary;
  const Dictionary& db = b.dictionary;
  if (da.words != db.words || da.dim != db.dim || da.iterations != db.iterations ||
      std::bit_cast<std::uint64_t>(da.inertia) != std::bit_cast<std::uint64_t>(db.inertia) ||
      !bits_equal(da.centroids, db.centroids) || !bits_equal(a.idf, b.idf) ||
      std::bit_cast<std::uint64_t>(a.spacing) != std::bit_cast<std::uint64_t>(b.spacing) ||
      a.entries.size() != b.entries.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i];
    const auto& y = b.entries[i];
    if (x.frame_id != y.frame_id || !same_pose(x.pose, y.pose) || !bits_equal(x.global.weights, y.global.weights) ||
        !same_descriptors(x.local, y.local)) {
      return false;
    }
  }
  return true;
}

}  // namespace bvmatch
