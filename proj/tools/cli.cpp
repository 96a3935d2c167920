// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bvmatch/eval.hpp"
#include "bvmatch/pipeline.hpp"
#include "bvmatch/retrieval.hpp"
#include "bvmatch/synth.hpp"

namespace bvmatch {

namespace {

namespace fs = std::filesystem;

template <typename T>
void apply(const CLI::Option* opt, const T& value, T& target) {
  if (opt->count() > 0) target = value;
}

PointCloud read_cloud(const fs::path& path, const std::string& format) {
  const CloudFormat f = format.empty() ? guess_cloud_format(path) : parse_cloud_format(format);
  LoadResult r = load_cloud(path, f);
  if (r.rejected > 0) std::fprintf(stderr, "%s: skipped %zu non-finite points\n", path.string().c_str(), r.rejected);
  r.cloud.frame_id = path.stem().string();
  return r.cloud;
}

std::vector<PointCloud> read_frames(const fs::path& list, const std::string& format) {
  std::vector<PointCloud> frames;
  for (const auto& rec : read_frame_list(list)) {
    PointCloud c = read_cloud(rec.path, format);
    c.frame_id = rec.frame_id;
    c.pose = rec.pose;
    frames.push_back(std::move(c));
  }
  if (frames.empty()) throw Error(list.string() + ": no frames listed");
  return frames;
}

std::vector<DescriptorSet> describe_all(const Frontend& fe, const std::vector<PointCloud>& frames) {
  std::vector<DescriptorSet> sets(frames.size());
  const long n = static_cast<long>(frames.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) sets[static_cast<std::size_t>(i)] = fe.describe(frames[static_cast<std::size_t>(i)]);
  return sets;
}

struct SynthArgs {
  std::uint64_t seed = 0;
  std::uint64_t sample_seed = 0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double noise = 0.0;
  double clutter = 0.0;
  double range = 48.0;
  int frames = 0;
  double step = 2.0;
  fs::path out;
  fs::path out_dir;
  std::string format;
};

int run_synth(const SynthArgs& a, const CLI::Option* sample_seed_opt) {
  const std::uint64_t sample_seed = sample_seed_opt->count() > 0 ? a.sample_seed : a.seed + 1;
  if (a.frames > 0) {
    if (a.out_dir.empty()) throw Error("--frames needs --out-dir");
    UrbanLayout layout;
    layout.x_min = -50.0;
    layout.x_max = a.step * (a.frames - 1) + 50.0;
    layout.y_min = -60.0;
    layout.y_max = 60.0;
    SceneSpec spec = random_urban_scene(a.seed, layout);
    spec.noise_sigma = a.noise;
    spec.clutter_fraction = a.clutter;
    spec.max_range = a.range;
    fs::create_directories(a.out_dir);
    const CloudFormat format = a.format.empty() ? CloudFormat::kXyzAscii : parse_cloud_format(a.format);
    const char* ext = format == CloudFormat::kXyzBinary ? ".bin" : ".xyz";
    std::vector<FrameRecord> records;
    for (int i = 0; i < a.frames; ++i) {
      spec.sensor = Pose2D(a.step * i, 0.0, 0.0);
      const PointCloud c = synth_scene(sample_seed + static_cast<std::uint64_t>(i), spec);
      char name[32];
      std::snprintf(name, sizeof name, "frame_%04d%s", i, ext);
      save_cloud(c, a.out_dir / name, format);
      records.push_back({fs::path(name), fs::path(name).stem().string(), spec.sensor});
    }
    write_frame_list(records, a.out_dir / "frames.csv");
    std::printf("wrote %d frames and %s\n", a.frames, (a.out_dir / "frames.csv").string().c_str());
    return 0;
  }
  if (a.out.empty()) throw Error("synth needs --out or --frames/--out-dir");
  SceneSpec spec = random_urban_scene(a.seed, UrbanLayout{});
  spec.sensor = Pose2D(a.x, a.y, a.theta);
  spec.noise_sigma = a.noise;
  spec.clutter_fraction = a.clutter;
  spec.max_range = a.range;
  const PointCloud c = synth_scene(sample_seed, spec);
  save_cloud(c, a.out, a.format.empty() ? guess_cloud_format(a.out) : parse_cloud_format(a.format));
  std::printf("%zu points, sensor pose %.6f %.6f %.6f\n", c.size(), spec.sensor.tx, spec.sensor.ty,
              spec.sensor.theta);
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"BV image descriptors, place retrieval and pose estimation for lidar scans", "bvmatch"};
  app.require_subcommand(1);
  app.fallthrough();

  fs::path config_path;
  int threads = 0;
  std::string format;
  app.add_option("--config", config_path, "key = value settings file")->check(CLI::ExistingFile);
  app.add_option("--threads", threads, "worker threads (0 keeps the default)");
  app.add_option("--format", format, "cloud format: xyz-ascii or xyz-bin (default from the extension)");

  double cell = 0.0;
  double extent = 0.0;
  std::uint64_t seed = 0;
  auto add_geometry = [&](CLI::App* sub, std::vector<const CLI::Option*>& opts) {
    opts.push_back(sub->add_option("--cell", cell, "grid resolution g in meters"));
    opts.push_back(sub->add_option("--extent", extent, "half window C in meters"));
  };

  // synth
  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate a synthetic urban scan or trajectory");
  synth->add_option("--seed", sa.seed, "scene layout seed");
  auto* sample_seed_opt = synth->add_option("--sample-seed", sa.sample_seed, "point sampling seed (default seed+1)");
  synth->add_option("--x", sa.x, "sensor x in meters");
  synth->add_option("--y", sa.y, "sensor y in meters");
  synth->add_option("--theta", sa.theta, "sensor heading in radians");
  synth->add_option("--noise", sa.noise, "Gaussian point jitter in meters");
  synth->add_option("--clutter", sa.clutter, "fraction of uniform clutter points");
  synth->add_option("--range", sa.range, "sensor range in meters");
  synth->add_option("--frames", sa.frames, "trajectory mode: number of frames along +x");
  synth->add_option("--step", sa.step, "trajectory step in meters");
  synth->add_option("--out", sa.out, "output cloud");
  synth->add_option("--out-dir", sa.out_dir, "trajectory output directory");

  // render-bv
  fs::path in_cloud;
  fs::path out_path;
  fs::path csv_path;
  std::vector<const CLI::Option*> render_geo;
  auto* render = app.add_subcommand("render-bv", "render the BV density image of a cloud");
  render->add_option("cloud", in_cloud, "input cloud")->required()->check(CLI::ExistingFile);
  render->add_option("--out", out_path, "output PGM")->required();
  render->add_option("--csv", csv_path, "also write intensities as CSV");
  add_geometry(render, render_geo);

  // describe
  auto* describe = app.add_subcommand("describe", "extract BVFT descriptors of a cloud");
  describe->add_option("cloud", in_cloud, "input cloud")->required()->check(CLI::ExistingFile);
  describe->add_option("--out", out_path, "output BVFT record")->required();

  // train-dict
  fs::path frames_path;
  int words = 0;
  int max_iter = 0;
  std::size_t max_desc = 0;
  auto* train = app.add_subcommand("train-dict", "train the bag-of-words dictionary");
  train->add_option("--frames", frames_path, "frame list CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "output dictionary")->required();
  auto* words_opt = train->add_option("--words", words, "dictionary size b");
  auto* iter_opt = train->add_option("--max-iter", max_iter, "k-means iteration cap");
  auto* maxd_opt = train->add_option("--max-descriptors", max_desc, "subsample the training set (0 keeps all)");
  auto* train_seed = train->add_option("--seed", seed, "k-means and subsampling seed");

  // build-db
  fs::path dict_path;
  double spacing = 0.0;
  auto* build = app.add_subcommand("build-db", "build a keyframe database");
  build->add_option("--frames", frames_path, "frame list CSV")->required()->check(CLI::ExistingFile);
  build->add_option("--dict", dict_path, "dictionary file")->required()->check(CLI::ExistingFile);
  build->add_option("--out", out_path, "output database")->required();
  auto* spacing_opt = build->add_option("--spacing", spacing, "keyframe spacing S in meters");

  // query
  fs::path db_path;
  int top = 5;
  auto* q = app.add_subcommand("query", "retrieve the nearest keyframes of a cloud");
  q->add_option("--db", db_path, "database file")->required()->check(CLI::ExistingFile);
  q->add_option("cloud", in_cloud, "query cloud")->required()->check(CLI::ExistingFile);
  q->add_option("--top", top, "number of results");
  q->add_option("--out", out_path, "also write the ranking as CSV");

  // match-pair
  fs::path cloud_b;
  auto* match = app.add_subcommand("match-pair", "estimate the relative pose of two clouds");
  match->add_option("a", in_cloud, "source cloud")->required()->check(CLI::ExistingFile);
  match->add_option("b", cloud_b, "target cloud")->required()->check(CLI::ExistingFile);
  auto* match_seed = match->add_option("--seed", seed, "RANSAC seed");
  match->add_option("--out", out_path, "append the report row to this CSV");

  // eval-recall
  fs::path queries_path;
  double threshold = 0.0;
  int top_n = 0;
  auto* recall = app.add_subcommand("eval-recall", "Top-N recall of a database");
  recall->add_option("--db", db_path, "database file")->required()->check(CLI::ExistingFile);
  recall->add_option("--queries", queries_path, "query frame list (default: the keyframes themselves)")
      ->check(CLI::ExistingFile);
  auto* thr_opt = recall->add_option("--threshold", threshold, "positive distance t in meters");
  auto* topn_opt = recall->add_option("--top-n", top_n, "largest N");
  recall->add_option("--out", out_path, "recall curve CSV");

  // eval-pose
  fs::path est_path;
  fs::path truth_path;
  auto* pose = app.add_subcommand("eval-pose", "RTE / RRE of estimated poses");
  pose->add_option("--estimates", est_path, "id,tx,ty,theta CSV")->required()->check(CLI::ExistingFile);
  pose->add_option("--truths", truth_path, "id,tx,ty,theta CSV")->required()->check(CLI::ExistingFile);
  pose->add_option("--out", out_path, "per-pair CSV");

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
    PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_config(config_path);

    if (*synth) {
      sa.format = format;
      return run_synth(sa, sample_seed_opt);
    }

    if (*render) {
      apply(render_geo[0], cell, config.geometry.cell);
      apply(render_geo[1], extent, config.geometry.half_extent);
      const PointCloud c = read_cloud(in_cloud, format);
      const BvImage img = make_bv_image(c, config.geometry.cell, config.geometry.half_extent);
      render_pgm(img, out_path);
      if (!csv_path.empty()) write_csv(img, csv_path);
      std::printf("%dx%d BV image written to %s\n", img.intensity.width(), img.intensity.height(),
                  out_path.string().c_str());
      return 0;
    }

    if (*describe) {
      const Frontend fe(config);
      const DescriptorSet set = fe.describe(read_cloud(in_cloud, format));
      save_descriptor_set(set, out_path);
      std::printf("%zu keypoints, %zu descriptors of length %zu\n", set.keypoint_count(), set.descriptors.size(),
                  set.dimension());
      return 0;
    }

    if (*train) {
      apply(words_opt, words, config.words);
      apply(iter_opt, max_iter, config.kmeans_max_iter);
      apply(maxd_opt, max_desc, config.train_max_descriptors);
      apply(train_seed, seed, config.seed);
      const Frontend fe(config);
      const auto frames = read_frames(frames_path, format);
      DescriptorMatrix m = stack_descriptors(describe_all(fe, frames));
      if (config.train_max_descriptors > 0) m = subsample_rows(m, config.train_max_descriptors, config.seed);
      const Dictionary dict = train_dictionary(m, config.words, config.kmeans_max_iter, config.seed);
      save_dictionary(dict, out_path);
      std::printf("%d words from %zu descriptors, %d iterations, inertia %.6g\n", dict.words, m.rows(),
                  dict.iterations, dict.inertia);
      return 0;
    }

    if (*build) {
      apply(spacing_opt, spacing, config.keyframe_spacing);
      const Frontend fe(config);
      const auto frames = read_frames(frames_path, format);
      const Dictionary dict = load_dictionary(dict_path);
      const KeyframeDb db = build_database(frames, config.keyframe_spacing, dict,
                                           [&fe](const PointCloud& c) { return fe.describe(c); });
      save_db(db, out_path);
      std::printf("%zu keyframes of %zu frames\n", db.entries.size(), frames.size());
      return 0;
    }

    if (*q) {
      const Frontend fe(config);
      const KeyframeDb db = load_db(db_path);
      const auto hits = query(db, describe_global(db, fe.describe(read_cloud(in_cloud, format))), top);
      std::FILE* f = out_path.empty() ? nullptr : std::fopen(out_path.string().c_str(), "w");
      if (!out_path.empty() && !f) throw Error("cannot write " + out_path.string());
      std::printf("rank,frame_id,distance\n");
      if (f) std::fprintf(f, "rank,frame_id,distance\n");
      for (std::size_t r = 0; r < hits.size(); ++r) {
        std::printf("%zu,%s,%.6f\n", r + 1, hits[r].frame_id.c_str(), hits[r].distance);
        if (f) std::fprintf(f, "%zu,%s,%.6f\n", r + 1, hits[r].frame_id.c_str(), hits[r].distance);
      }
      if (f && std::fclose(f) != 0) throw Error("write failed: " + out_path.string());
      return 0;
    }

    if (*match) {
      apply(match_seed, seed, config.ransac.seed);
      const Frontend fe(config);
      const PairResult r = register_pair(fe, read_cloud(in_cloud, format), read_cloud(cloud_b, format));
      std::printf("%s\n%s\n", report_header().c_str(), report_line(r).c_str());
      if (!out_path.empty()) {
        const bool fresh = !fs::exists(out_path) || fs::file_size(out_path) == 0;
        std::FILE* f = std::fopen(out_path.string().c_str(), "a");
        if (!f) throw Error("cannot write " + out_path.string());
        if (fresh) std::fprintf(f, "%s\n", report_header().c_str());
        std::fprintf(f, "%s\n", report_line(r).c_str());
        if (std::fclose(f) != 0) throw Error("write failed: " + out_path.string());
      }
      return 0;
    }

    if (*recall) {
      apply(thr_opt, threshold, config.recall_threshold);
      apply(topn_opt, top_n, config.recall_top_n);
      const KeyframeDb db = load_db(db_path);
      std::vector<RecallQuery> queries;
      if (queries_path.empty()) {
        for (const auto& e : db.entries) queries.push_back({e.global, e.pose});
      } else {
        const Frontend fe(config);
        const auto frames = read_frames(queries_path, format);
        const auto sets = describe_all(fe, frames);
        for (std::size_t i = 0; i < frames.size(); ++i) queries.push_back({describe_global(db, sets[i]), *frames[i].pose});
      }
      const RecallCurve curve = eval_recall(db, queries, config.recall_threshold, config.recall_top_n);
      if (!out_path.empty()) write_recall_csv(curve, out_path);
      std::printf("queries = %zu\nrecall@1 = %.3f\n", curve.queries, curve.at(1));
      if (config.recall_top_n >= 5) std::printf("recall@5 = %.3f\n", curve.at(5));
      std::printf("recall@%d = %.3f\n", config.recall_top_n, curve.at(config.recall_top_n));
      return 0;
    }

    if (*pose) {
      const auto est = read_pose_csv(est_path);
      const auto truth = read_pose_csv(truth_path);
      std::vector<Pose2D> e;
      std::vector<Pose2D> t;
      std::vector<std::string> ids;
      for (const auto& [id, p] : est) {
        ids.push_back(id);
        e.push_back(p);
      }
      for (const auto& [id, p] : truth) t.push_back(p);
      const PoseErrorReport rep = eval_pose(e, t);
      if (!out_path.empty()) write_pose_report_csv(rep, ids, out_path);
      std::printf("pairs = %zu\nsuccess = %.3f\nmean_rte_m = %.4f\nstd_rte_m = %.4f\nmean_rre_deg = %.4f\n"
                  "std_rre_deg = %.4f\n",
                  rep.pairs.size(), rep.success_rate, rep.mean_rte, rep.std_rte, rep.mean_rre, rep.std_rre);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}

}  // namespace bvmatch
