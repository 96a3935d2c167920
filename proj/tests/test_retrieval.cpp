// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <numbers>
#include <random>
#include <sstream>

#include "bvmatch/pipeline.hpp"
#include "bvmatch/retrieval.hpp"
#include "test_util.hpp"

using namespace bvmatch;
using bvmatch::testing::TempDir;

namespace {

DescriptorMatrix blob_matrix(const std::vector<std::array<float, 2>>& pts) {
  DescriptorMatrix m;
  m.dim = 2;
  for (const auto& p : pts) m.append({p[0], p[1]});
  return m;
}

DescriptorSet random_descriptors(int keypoints, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  DescriptorSet s;
  for (int k = 0; k < keypoints; ++k) {
    for (int v = 0; v < 2; ++v) {
      Descriptor d;
      d.vector.resize(static_cast<std::size_t>(dim));
      for (auto& x : d.vector) x = u(rng);
      d.keypoint = {static_cast<int>(rng() % 250), static_cast<int>(rng() % 250), 1.0};
      d.variant = static_cast<DescriptorVariant>(v);
      s.descriptors.push_back(std::move(d));
    }
  }
  return s;
}

Dictionary random_dictionary(int words, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Dictionary d;
  d.words = words;
  d.dim = dim;
  d.centroids.resize(static_cast<std::size_t>(words * dim));
  for (auto& x : d.centroids) x = u(rng);
  return d;
}

double sq(const float* a, const float* b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += (double(a[k]) - b[k]) * (double(a[k]) - b[k]);
  return s;
}

KeyframeDb small_db(int entries, std::uint64_t seed) {
  const auto dict = random_dictionary(16, 8, seed);
  std::vector<KeyframeEntry> kf;
  for (int i = 0; i < entries; ++i) {
    KeyframeEntry e;
    e.frame_id = "f" + std::to_string(1000 + i);
    e.pose = Pose2D(10.0 * i, 0.5 * i, 0.01 * i);
    e.local = random_descriptors(5 + i % 4, 8, seed * 100 + i);
    kf.push_back(std::move(e));
  }
  return build_database(std::move(kf), 10.0, dict);
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("k-means recovers separated points exactly") {
  const auto m = blob_matrix({{0, 0}, {10, 0}, {0, 10}, {10, 10}, {0, 0}, {10, 10}});
  const auto d = train_dictionary(m, 4, 50, 1);
  CHECK(d.inertia == 0.0);
  CHECK(d.words == 4);
  CHECK(d.dim == 2);
  std::vector<std::pair<float, float>> c;
  for (int w = 0; w < 4; ++w) c.push_back({d.centroid(w)[0], d.centroid(w)[1]});
  std::sort(c.begin(), c.end());
  CHECK(c == std::vector<std::pair<float, float>>{{0, 0}, {0, 10}, {10, 0}, {10, 10}});
  CHECK_THROWS_AS(train_dictionary(m, 7, 50, 1), Error);
}

TEST_CASE("k-means inertia never increases") {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g(0.0f, 1.0f);
  DescriptorMatrix m;
  m.dim = 16;
  for (int i = 0; i < 2000; ++i) {
    std::vector<float> v(16);
    for (auto& x : v) x = g(rng) + static_cast<float>(i % 7);
    m.append(v);
  }
  std::vector<double> history;
  const auto d = train_dictionary(m, 20, 100, 3, &history);
  REQUIRE(history.size() >= 2);
  for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1] * (1 + 1e-12));
  CHECK(d.inertia == history.back());
  for (float x : d.centroids) CHECK(std::isfinite(x));
}

TEST_CASE("k-means on toy data is close to the exhaustive optimum") {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> g(0.0f, 1.5f);
  const float centers[3][2] = {{0, 0}, {6, 1}, {2, 7}};
  std::vector<std::array<float, 2>> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({centers[i % 3][0] + g(rng), centers[i % 3][1] + g(rng)});
  // Every assignment of 12 points to 3 clusters.
  double best = 1e300;
  std::vector<int> lab(12, 0);
  for (int code = 0; code < 531441; ++code) {
    int c = code;
    for (int i = 0; i < 12; ++i) {
      lab[i] = c % 3;
      c /= 3;
    }
    double sx[3] = {0, 0, 0};
    double sy[3] = {0, 0, 0};
    double n[3] = {0, 0, 0};
    for (int i = 0; i < 12; ++i) {
      sx[lab[i]] += pts[i][0];
      sy[lab[i]] += pts[i][1];
      n[lab[i]] += 1;
    }
    if (n[0] == 0 || n[1] == 0 || n[2] == 0) continue;
    double s = 0.0;
    for (int i = 0; i < 12; ++i) {
      const double dx = pts[i][0] - sx[lab[i]] / n[lab[i]];
      const double dy = pts[i][1] - sy[lab[i]] / n[lab[i]];
      s += dx * dx + dy * dy;
    }
    best = std::min(best, s);
  }
  const auto m = blob_matrix(pts);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = train_dictionary(m, 3, 100, seed);
    INFO("seed " << seed << " inertia " << d.inertia << " optimum " << best);
    CHECK(d.inertia <= 1.05 * best + 1e-9);
  }
}

TEST_CASE("k-means is deterministic and serial equals parallel") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  DescriptorMatrix m;
  m.dim = 32;
  for (int i = 0; i < 1500; ++i) {
    std::vector<float> v(32);
    for (auto& x : v) x = u(rng);
    m.append(v);
  }
  const auto a = train_dictionary(m, 25, 20, 9);
  const auto b = train_dictionary(m, 25, 20, 9);
  const auto c = serial::train_dictionary(m, 25, 20, 9);
  CHECK(a.centroids == b.centroids);
  CHECK(a.centroids == c.centroids);
  CHECK(a.inertia == c.inertia);
  CHECK(a.iterations == c.iterations);
  CHECK(train_dictionary(m, 25, 20, 10).centroids != a.centroids);
}

TEST_CASE("subsampling keeps order and size") {
  DescriptorMatrix m;
  m.dim = 1;
  for (int i = 0; i < 100; ++i) m.append({static_cast<float>(i)});
  const auto s = subsample_rows(m, 30, 1);
  REQUIRE(s.rows() == 30);
  for (std::size_t i = 1; i < s.rows(); ++i) CHECK(s.row(i)[0] > s.row(i - 1)[0]);
  CHECK(subsample_rows(m, 500, 1).data == m.data);
  CHECK(subsample_rows(m, 30, 1).data == s.data);
}

TEST_CASE("quantize") {
  const auto dict = random_dictionary(10, 4, 6);
  CHECK(quantize(DescriptorSet{}, dict) == WordHistogram(10, 0));

  DescriptorSet at_centroids;
  for (int w : {3, 3, 7, 0, 3, 9}) {
    Descriptor d;
    d.vector.assign(dict.centroid(w), dict.centroid(w) + 4);
    at_centroids.descriptors.push_back(d);
  }
  const auto h = quantize(at_centroids, dict);
  CHECK(h == WordHistogram{1, 0, 0, 3, 0, 0, 0, 1, 0, 1});

  const auto set = random_descriptors(200, 4, 7);
  WordHistogram oracle(10, 0);
  for (const auto& d : set.descriptors) {
    int best = 0;
    for (int w = 1; w < 10; ++w) {
      if (sq(d.vector.data(), dict.centroid(w), 4) < sq(d.vector.data(), dict.centroid(best), 4)) best = w;
    }
    ++oracle[static_cast<std::size_t>(best)];
  }
  CHECK(quantize(set, dict) == oracle);
  CHECK_THROWS_AS(quantize(random_descriptors(1, 5, 1), dict), Error);
}

TEST_CASE("nearest word ties go to the smallest index") {
  Dictionary d;
  d.words = 3;
  d.dim = 1;
  d.centroids = {2.0f, 0.0f, 2.0f};
  const float x = 1.0f;
  CHECK(nearest_word(d, &x) == 0);
}

TEST_CASE("inverse document frequency") {
  CHECK(compute_idf({{1, 0}, {2, 0}, {1, 0}}) == std::vector<double>{0.0, 0.0});
  // Word 1 appears in 1 of 3 documents: ln 3. Word 0 in every one.
  const auto idf = compute_idf({{1, 5}, {2, 0}, {1, 0}});
  CHECK(idf[1] == doctest::Approx(std::log(3.0)));

  // No integer corpus has n_w = N / e exactly; 368 of 1000 is within 1e-3 of idf 1.
  std::vector<WordHistogram> corpus(1000, WordHistogram{1, 0});
  for (int i = 0; i < 368; ++i) corpus[static_cast<std::size_t>(i)][1] = 1;
  CHECK(compute_idf(corpus)[1] == doctest::Approx(std::log(1000.0 / 368.0)));
  CHECK(std::abs(compute_idf(corpus)[1] - 1.0) < 1e-3);

  std::mt19937_64 rng(8);
  std::vector<WordHistogram> random(40, WordHistogram(25, 0));
  for (auto& h : random) {
    for (auto& c : h) c = rng() % 4 == 0 ? static_cast<std::uint32_t>(rng() % 5) : 0u;
  }
  const auto got = compute_idf(random);
  for (std::size_t w = 0; w < 25; ++w) {
    int df = 0;
    for (const auto& h : random) df += h[w] > 0;
    CHECK(got[w] == (df == 0 ? 0.0 : std::log(40.0 / df)));
    CHECK(got[w] >= 0.0);
  }
  CHECK_THROWS_WITH(compute_idf({}), "empty corpus");
}

TEST_CASE("global descriptors") {
  const std::vector<double> idf{0.5, 1.2, 0.0, 2.0};
  const auto one = global_descriptor({0, 7, 0, 0}, idf);
  CHECK(one.weights == std::vector<double>{0.0, 1.0, 0.0, 0.0});
  const auto zero = global_descriptor({0, 0, 0, 0}, idf);
  CHECK(zero.weights == std::vector<double>(4, 0.0));
  CHECK_THROWS_AS(global_descriptor({1, 2}, idf), Error);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    WordHistogram h(30);
    std::vector<double> w(30);
    for (auto& c : h) c = static_cast<std::uint32_t>(rng() % 6);
    for (auto& x : w) x = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    double total = 0;
    for (auto c : h) total += c;
    std::vector<double> expect(30);
    double norm = 0.0;
    for (std::size_t i = 0; i < 30; ++i) {
      expect[i] = h[i] / total * w[i];
      norm += expect[i] * expect[i];
    }
    const auto g = global_descriptor(h, w);
    for (std::size_t i = 0; i < 30; ++i) CHECK(std::abs(g.weights[i] - expect[i] / std::sqrt(norm)) <= 1e-12);
  }
}

TEST_CASE("keyframe selection") {
  CHECK(select_keyframes(std::vector<Pose2D>(20, Pose2D(3, 4, 0)), 10.0).size() == 1);
  std::vector<Pose2D> line;
  for (int i = 0; i <= 100; ++i) line.emplace_back(i, 0, 0);
  CHECK(select_keyframes(line, 10.0).size() == 11);
  CHECK(select_keyframes({}, 10.0).empty());

  std::mt19937_64 rng(10);
  std::normal_distribution<double> step(0.0, 1.5);
  std::vector<Pose2D> walk{Pose2D()};
  for (int i = 0; i < 500; ++i) walk.emplace_back(walk.back().tx + step(rng), walk.back().ty + step(rng), 0);
  std::vector<std::size_t> oracle;
  double lx = 0;
  double ly = 0;
  for (std::size_t i = 0; i < walk.size(); ++i) {
    const double dx = walk[i].tx - lx;
    const double dy = walk[i].ty - ly;
    if (i == 0 || dx * dx + dy * dy >= 100.0) {
      oracle.push_back(i);
      lx = walk[i].tx;
      ly = walk[i].ty;
    }
  }
  CHECK(select_keyframes(walk, 10.0) == oracle);
}

TEST_CASE("database from posed frames") {
  std::vector<PointCloud> frames;
  for (int i = 0; i < 30; ++i) {
    PointCloud c;
    c.points = {{static_cast<double>(i), 0, 0}};
    c.frame_id = "frame_" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    c.pose = Pose2D(2.5 * i, 0, 0);
    frames.push_back(c);
  }
  const auto dict = random_dictionary(12, 6, 11);
  const Describer describe = [](const PointCloud& c) {
    return random_descriptors(6, 6, static_cast<std::uint64_t>(c.points[0].x) + 1);
  };
  const auto db = build_database(frames, 10.0, dict, describe);
  REQUIRE(db.entries.size() == 8);
  for (std::size_t i = 0; i < db.entries.size(); ++i) {
    CHECK(db.entries[i].pose.tx == doctest::Approx(10.0 * i));
    CHECK(db.entries[i].local.frame_id == db.entries[i].frame_id);
    const double n = std::sqrt(std::inner_product(db.entries[i].global.weights.begin(),
                                                  db.entries[i].global.weights.end(),
                                                  db.entries[i].global.weights.begin(), 0.0));
    CHECK((n == 0.0 || std::abs(n - 1.0) < 1e-12));
    for (double w : db.entries[i].global.weights) CHECK(w >= 0.0);
  }
  CHECK(std::is_sorted(db.entries.begin(), db.entries.end(),
                       [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; }));
  frames[3].pose.reset();
  CHECK_THROWS_WITH(build_database(frames, 10.0, dict, describe), doctest::Contains("has no pose"));
}

TEST_CASE("every keyframe retrieves itself") {
  const auto db = small_db(20, 12);
  for (std::size_t i = 0; i < db.entries.size(); ++i) {
    const auto hits = query(db, describe_global(db, db.entries[i].local), 3);
    REQUIRE(!hits.empty());
    CHECK(hits[0].index == i);
    CHECK(hits[0].frame_id == db.entries[i].frame_id);
    CHECK(hits[0].distance == 0.0);
  }
}

TEST_CASE("query clamps n and sorts like an exhaustive oracle") {
  const auto db = small_db(50, 13);
  const auto q = describe_global(db, random_descriptors(7, 8, 999));
  const auto all = query(db, q, 500);
  REQUIRE(all.size() == 50);
  std::vector<std::pair<double, std::string>> oracle;
  for (const auto& e : db.entries) {
    double s = 0.0;
    for (std::size_t w = 0; w < q.weights.size(); ++w) {
      s += (q.weights[w] - e.global.weights[w]) * (q.weights[w] - e.global.weights[w]);
    }
    oracle.emplace_back(std::sqrt(s), e.frame_id);
  }
  std::sort(oracle.begin(), oracle.end());
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(all[i].frame_id == oracle[i].second);
    CHECK(all[i].distance == doctest::Approx(oracle[i].first).epsilon(1e-12));
  }
  CHECK(query(db, q, 5).size() == 5);
  CHECK_THROWS_WITH(query(KeyframeDb{}, q, 5), "empty database");
  CHECK_THROWS_AS(query(db, q, 0), Error);
}

TEST_CASE("database files round-trip") {
  TempDir dir("db");
  const auto db = small_db(6, 14);
  save_db(db, dir / "a.bvdb");
  CHECK(same_database(load_db(dir / "a.bvdb"), db));

  save_dictionary(db.dictionary, dir / "a.bvdc");
  const auto dict = load_dictionary(dir / "a.bvdc");
  CHECK(dict.centroids == db.dictionary.centroids);
  CHECK(dict.words == db.dictionary.words);

  std::stringstream buf;
  write_db(buf, db);
  std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "BVDB");

  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(dir / "bad.bvdb", std::ios::binary) << bad;
  CHECK_THROWS_WITH(load_db(dir / "bad.bvdb"), doctest::Contains("not a BVDB file"));

  std::ofstream(dir / "cut.bvdb", std::ios::binary) << bytes.substr(0, bytes.size() - 50);
  CHECK_THROWS_WITH(load_db(dir / "cut.bvdb"), doctest::Contains("truncated database at entry 5"));
  std::ofstream(dir / "head.bvdb", std::ios::binary) << bytes.substr(0, 20);
  CHECK_THROWS_WITH(load_db(dir / "head.bvdb"), doctest::Contains("truncated database"));
}

TEST_CASE("rotated keyframes retrieve their original") {
  PipelineConfig config;
  config.words = 60;
  const Frontend fe(config);
  std::vector<PointCloud> frames;
  std::vector<DescriptorSet> sets;
  SceneSpec world = random_urban_scene(91, UrbanLayout{-50, 170, -60, 60});
  world.max_range = 48.0;
  for (int i = 0; i < 8; ++i) {
    world.sensor = Pose2D(15.0 * i, 0, 0.1 * i);
    auto c = synth_scene(100 + i, world);
    c.frame_id = "k" + std::to_string(i);
    sets.push_back(fe.describe(c));
    frames.push_back(std::move(c));
  }
  const auto dict = train_dictionary(stack_descriptors(sets), 60, 30, 1);
  const auto db = build_database(frames, 10.0, dict, [&](const PointCloud& c) {
    return sets[static_cast<std::size_t>(std::stoi(c.frame_id.substr(1)))];
  });
  REQUIRE(db.entries.size() == 8);
  for (std::size_t i = 0; i < frames.size(); i += 3) {
    const int k = 1 + static_cast<int>(i) % 5;
    const auto rotated = transform_cloud(frames[i], Pose2D(0, 0, k * std::numbers::pi / 6));
    const auto hits = query(db, describe_global(db, fe.describe(rotated)), 1);
    INFO("frame " << i << " rotated by " << 30 * k << " deg");
    CHECK(hits[0].frame_id == frames[i].frame_id);
  }
}

}  // TEST_SUITE
