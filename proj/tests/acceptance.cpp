// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "../tools/cli.hpp"
#include "bvmatch/eval.hpp"
#include "bvmatch/pipeline.hpp"
#include "bvmatch/retrieval.hpp"
#include "bvmatch/synth.hpp"
#include "properties.hpp"
#include "test_util.hpp"

using namespace bvmatch;
using namespace bvmatch::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& run) {
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  failures += o.pass ? 0 : 1;
  std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Criterion 1: circular MIM shift under rotation by k*pi/No.
Outcome mim_rotation_shift() {
  const auto t0 = Clock::now();
  const FilterBank bank(250, 250, LogGaborParams{});
  double worst = 1.0;
  std::string where;
  for (int s = 0; s < 20; ++s) {
    const PointCloud cloud = urban_scan(100 + static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(s));
    for (int k = 1; k < 6; ++k) {
      const double a = mim_shift_agreement(cloud, k * std::numbers::pi / 6, k, bank, 5);
      if (a < worst) {
        worst = a;
        where = fmt("scene %d k=%d", s, k);
      }
    }
  }
  const double elapsed = seconds_since(t0);
  return {worst >= 0.90 && elapsed <= 60.0,
          fmt("worst agreement %.3f at %s over 20 scenes x 5 shifts (need >= 0.900), %.1f s (limit 60 s)", worst,
              where.c_str(), elapsed)};
}

// Criterion 2: FFT channel amplitudes against direct spatial convolution.
Outcome fft_vs_spatial() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  Grid<double> img(32, 32, 0.0);
  for (double& x : img.data()) x = u(rng) < 0.3 ? u(rng) : 0.0;
  const FilterBank bank(32, 32, LogGaborParams{});
  const ChannelResponses fft = filter_responses(img, bank);
  double worst = 0;
  for (int s = 0; s < bank.params().scales; ++s) {
    for (int o = 0; o < bank.params().orientations; ++o) {
      const Grid<double> ref = spatial_channel_amplitude(img, bank, s, o);
      double diff = 0;
      double peak = 0;
      for (std::size_t i = 0; i < ref.size(); ++i) {
        diff = std::max(diff, std::abs(ref.data()[i] - fft.at(s, o).data()[i]));
        peak = std::max(peak, ref.data()[i]);
      }
      worst = std::max(worst, diff / peak);
    }
  }
  return {worst <= 1e-6, fmt("max relative error %.2e over %d channels (limit 1e-6)", worst,
                             bank.params().scales * bank.params().orientations)};
}

double keypoint_distance(const DescriptorSet& a, std::size_t i, const DescriptorSet& b, std::size_t j) {
  double d = INFINITY;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) d = std::min(d, descriptor_distance(a.descriptors[2 * i + x], b.descriptors[2 * j + y]));
  }
  return d;
}

// Criterion 3: corresponding keypoints stay closer than the 5th percentile of
// random same-frame pairs after rotation by multiples of 30 degrees.
Outcome descriptor_rotation_invariance() {
  const Frontend fe{PipelineConfig{}};
  const BvGeometry& g = fe.config().geometry;
  double worst_scene = 1.0;
  double worst_angle = 1.0;
  int total_cases = 0;
  for (int scene = 0; scene < 10; ++scene) {
    const PointCloud cloud = urban_scan(500 + static_cast<std::uint64_t>(scene), static_cast<std::uint64_t>(scene));
    const DescriptorSet d0 = fe.describe(cloud);
    const std::size_t n = d0.keypoint_count();
    std::mt19937_64 rng(static_cast<std::uint64_t>(scene) + 1);
    std::vector<double> random_pairs;
    while (random_pairs.size() < 5000) {
      const std::size_t i = rng() % n;
      const std::size_t j = rng() % n;
      if (i != j) random_pairs.push_back(keypoint_distance(d0, i, d0, j));
    }
    std::sort(random_pairs.begin(), random_pairs.end());
    const double p5 = random_pairs[random_pairs.size() / 20];

    int scene_cases = 0;
    int scene_ok = 0;
    for (int step = 1; step <= 6; ++step) {
      const double alpha = step * std::numbers::pi / 6;
      const DescriptorSet d1 = fe.describe(transform_cloud(cloud, Pose2D(0, 0, alpha)));
      const double c = std::cos(alpha);
      const double s = std::sin(alpha);
      int cases = 0;
      int ok = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const Keypoint& kp = d0.descriptors[2 * i].keypoint;
        const double x = g.x_of(kp.u + 0.5);
        const double y = g.y_of(kp.v + 0.5);
        const double ur = g.u_of(c * x - s * y) - 0.5;
        const double vr = g.v_of(s * x + c * y) - 0.5;
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t j = 0; j < d1.keypoint_count(); ++j) {
          const Keypoint& q = d1.descriptors[2 * j].keypoint;
          const double dd = std::hypot(q.u - ur, q.v - vr);
          if (dd < best_d) {
            best_d = dd;
            best = j;
          }
        }
        // Corresponding keypoint: detected again within 2 px of the mapped location.
        if (best_d > 2.0) continue;
        ++cases;
        ok += keypoint_distance(d0, i, d1, best) < p5 ? 1 : 0;
      }
      worst_angle = std::min(worst_angle, cases ? static_cast<double>(ok) / cases : 0.0);
      scene_cases += cases;
      scene_ok += ok;
    }
    total_cases += scene_cases;
    worst_scene = std::min(worst_scene, scene_cases ? static_cast<double>(scene_ok) / scene_cases : 0.0);
  }
  return {worst_scene >= 0.80,
          fmt("worst per-scene share %.3f over 10 scenes x 6 angles, %d corresponding keypoints (need >= 0.800); "
              "worst single angle %.3f",
              worst_scene, total_cases, worst_angle)};
}

// Criterion 4: pose recovery on noisy synthetic pairs.
Outcome pose_recovery() {
  const auto t0 = Clock::now();
  const Frontend fe{PipelineConfig{}};
  const double cell = fe.config().geometry.cell;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1, 1);
  int ok = 0;
  const int pairs = 100;
  for (int i = 0; i < pairs; ++i) {
    SceneSpec spec = random_urban_scene(1000 + static_cast<std::uint64_t>(i), UrbanLayout{});
    spec.max_range = 48.0;
    spec.noise_sigma = 0.05;
    spec.clutter_fraction = 0.05;
    double tx = 0;
    double ty = 0;
    do {
      tx = 10 * u(rng);
      ty = 10 * u(rng);
    } while (std::hypot(tx, ty) > 10);
    const int k = std::uniform_int_distribution<int>(0, 11)(rng);
    const Pose2D pa;
    const Pose2D pb(tx, ty, k * std::numbers::pi / 6);
    spec.sensor = pa;
    const PointCloud a = synth_scene(2 * static_cast<std::uint64_t>(i), spec);
    spec.sensor = pb;
    const PointCloud b = synth_scene(2 * static_cast<std::uint64_t>(i) + 1, spec);
    try {
      const PairResult r = register_pair(fe, a, fe.describe(a), b, fe.describe(b));
      const PoseError e = pose_error(r.pose, pb.inverse() * pa);
      ok += (e.rte < 0.5 * cell && e.rre < 1.0) ? 1 : 0;
    } catch (const Error&) {
    }
  }
  const double elapsed = seconds_since(t0);
  const double rate = static_cast<double>(ok) / pairs;
  return {rate >= 0.90 && elapsed <= 300.0,
          fmt("%d/%d pairs with RTE < %.2f m and RRE < 1 deg (need >= 90%%), %.1f s (limit 300 s)", ok, pairs,
              0.5 * cell, elapsed)};
}

// Criterion 5: retrieval on a 200-keyframe trajectory with b = 200.
Outcome retrieval() {
  const Frontend fe{PipelineConfig{}};
  const int n = 200;
  UrbanLayout layout;
  layout.x_min = -50;
  layout.x_max = 10.0 * n + 50;
  layout.y_min = -60;
  layout.y_max = 60;
  SceneSpec world = random_urban_scene(7, layout);
  world.max_range = 48.0;
  std::vector<PointCloud> frames;
  for (int i = 0; i < n; ++i) {
    const double x = 10.0 * i;
    world.sensor = Pose2D(x, 5 * std::sin(x / 80), std::atan(5.0 / 80 * std::cos(x / 80)));
    PointCloud c = synth_scene(1000 + static_cast<std::uint64_t>(i), world);
    c.frame_id = fmt("kf_%04d", i);
    c.pose = world.sensor;
    frames.push_back(std::move(c));
  }
  std::vector<DescriptorSet> sets(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sets[static_cast<std::size_t>(i)] = fe.describe(frames[static_cast<std::size_t>(i)]);
  const Dictionary dict = train_dictionary(subsample_rows(stack_descriptors(sets), 20000, 3), 200, 30, 5);
  std::vector<KeyframeEntry> entries(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].frame_id = frames[i].frame_id;
    entries[i].pose = *frames[i].pose;
    entries[i].local = sets[i];
  }
  const KeyframeDb db = build_database(std::move(entries), 10.0, dict);

  std::vector<RecallQuery> self;
  std::vector<RecallQuery> rotated;
  std::mt19937_64 rng(9);
  for (std::size_t i = 0; i < db.entries.size(); ++i) {
    self.push_back({db.entries[i].global, db.entries[i].pose});
    const int k = std::uniform_int_distribution<int>(0, 5)(rng);
    const PointCloud r = transform_cloud(frames[i], Pose2D(0, 0, k * std::numbers::pi / 6));
    rotated.push_back({describe_global(db, fe.describe(r)), *frames[i].pose});
  }
  const double self_r1 = eval_recall(db, self, 25.0, 1).at(1);
  const double rot_r1 = eval_recall(db, rotated, 25.0, 1).at(1);
  return {db.entries.size() == static_cast<std::size_t>(n) && self_r1 == 1.0 && rot_r1 >= 0.90,
          fmt("%zu keyframes, self recall@1 %.3f (need 1.000), rotated recall@1 %.3f (need >= 0.900)",
              db.entries.size(), self_r1, rot_r1)};
}

bool same_cloud(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.points[i].x != b.points[i].x || a.points[i].y != b.points[i].y || a.points[i].z != b.points[i].z) {
      return false;
    }
  }
  return true;
}

// Criterion 6: seeded stages reproduce bit-identical outputs.
Outcome determinism() {
  std::vector<std::string> broken;
  SceneSpec spec = random_urban_scene(11, UrbanLayout{});
  spec.max_range = 48.0;
  spec.noise_sigma = 0.05;
  spec.clutter_fraction = 0.05;
  const PointCloud a1 = synth_scene(3, spec);
  if (!same_cloud(a1, synth_scene(3, spec))) broken.push_back("synth");
  spec.sensor = Pose2D(4, -3, std::numbers::pi / 3);
  const PointCloud b = synth_scene(4, spec);

  const Frontend fe{PipelineConfig{}};
  const DescriptorSet da = fe.describe(a1);
  const DescriptorSet db = fe.describe(b);
  if (!same_descriptors(da, fe.describe(a1))) broken.push_back("describe");

  const auto m = stack_descriptors({da, db});
  const Dictionary d1 = train_dictionary(m, 50, 30, 17);
  const Dictionary d2 = train_dictionary(m, 50, 30, 17);
  if (d1.centroids != d2.centroids || d1.iterations != d2.iterations || d1.inertia != d2.inertia) {
    broken.push_back("k-means");
  }

  const auto matches = match_descriptors(da, db, 0.9);
  RansacParams rp;
  rp.seed = 5;
  const RansacResult r1 = ransac_rigid(matches, da, db, fe.config().geometry, rp);
  const RansacResult r2 = ransac_rigid(matches, da, db, fe.config().geometry, rp);
  if (std::memcmp(&r1.transform, &r2.transform, sizeof r1.transform) != 0 || r1.inliers != r2.inliers || r1.iterations_used != r2.iterations_used) {
    broken.push_back("RANSAC");
  }

  const PairResult p1 = register_pair(fe, a1, da, b, db);
  const PairResult p2 = register_pair(fe, a1, da, b, db);
  if (report_line(p1) != report_line(p2) || !(p1.pose == p2.pose)) broken.push_back("register_pair");

  std::string detail = "synth, describe, k-means, RANSAC and register_pair repeat bit-identically";
  if (!broken.empty()) {
    detail = "differs between runs:";
    for (const auto& s : broken) detail += " " + s;
  }
  return {broken.empty(), detail};
}

// Criterion 7: describe_frame single-threaded and a full match-pair run.
Outcome performance() {
#ifdef _OPENMP
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
#endif
  const PointCloud a = urban_scan(21, 1);
  const PointCloud b = urban_scan(21, 2, Pose2D(3, -2, std::numbers::pi / 6));
  const PipelineConfig config;
  const FilterBank bank(250, 250, config.gabor);
  const BvImage img = make_bv_image(a, config.geometry.cell, config.geometry.half_extent);
  double describe_s = INFINITY;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = Clock::now();
    const DescriptorSet set = describe_frame(img, bank, config.bvft);
    describe_s = std::min(describe_s, seconds_since(t0));
  }
#ifdef _OPENMP
  omp_set_num_threads(saved);
#endif

  TempDir dir("acceptance_perf");
  save_cloud(a, dir / "a.bin", CloudFormat::kXyzBinary);
  save_cloud(b, dir / "b.bin", CloudFormat::kXyzBinary);
  const std::string pa = (dir / "a.bin").string();
  const std::string pb = (dir / "b.bin").string();
  const char* argv[] = {"bvmatch", "match-pair", pa.c_str(), pb.c_str(), "--seed", "1"};
  const auto t0 = Clock::now();
  const int code = cli_main(6, argv);
  const double match_s = seconds_since(t0);
  return {code == 0 && describe_s <= 1.0 && match_s <= 2.0,
          fmt("describe_frame %.3f s single-threaded (limit 1.0 s), match-pair %.3f s end to end (limit 2.0 s)",
              describe_s, match_s)};
}

// Criterion 8: randomized invariant suites.
Outcome properties() {
  const int n = 1000;
  const PropertyTally t[] = {bv_intensity_property(n, 101), mim_index_property(n, 202), descriptor_property(n, 303),
                             recall_monotonicity_property(n, 404)};
  const char* names[] = {"BV intensity", "MIM index", "descriptor norm/length", "recall monotonicity"};
  bool pass = true;
  std::string detail;
  for (int i = 0; i < 4; ++i) {
    pass = pass && t[i].cases >= 1000 && t[i].failures == 0;
    detail += fmt("%s%s %d/%d", i ? ", " : "", names[i], t[i].cases - t[i].failures, t[i].cases);
    if (t[i].failures) detail += " (first: " + t[i].first_failure + ")";
  }
  return {pass, detail + " cases hold"};
}

}  // namespace

int main() {
  report(1, "MIM rotation shift", mim_rotation_shift);
  report(2, "FFT vs spatial convolution", fft_vs_spatial);
  report(3, "descriptor rotation invariance", descriptor_rotation_invariance);
  report(4, "end-to-end pose recovery", pose_recovery);
  report(5, "retrieval", retrieval);
  report(6, "determinism", determinism);
  report(7, "performance budget", performance);
  report(8, "property suites", properties);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
