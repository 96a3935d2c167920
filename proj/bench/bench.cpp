// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <numbers>

#include "bvmatch/bvft.hpp"
#include "bvmatch/pipeline.hpp"
#include "bvmatch/registration.hpp"
#include "bvmatch/retrieval.hpp"
#include "bvmatch/synth.hpp"

namespace {

using namespace bvmatch;

struct Fixture {
  PipelineConfig config;
  Frontend frontend{config};
  BvImage image;
  Mim mim;
  std::vector<Keypoint> keypoints;
  DescriptorSet a;
  DescriptorSet b;
  DescriptorMatrix training;

  Fixture() {
    SceneSpec spec = random_urban_scene(21, UrbanLayout{});
    spec.max_range = 48.0;
    const PointCloud ca = synth_scene(1, spec);
    spec.sensor = Pose2D(3, -2, std::numbers::pi / 6);
    const PointCloud cb = synth_scene(2, spec);
    image = frontend.image(ca);
    mim = image_mim(image.intensity, frontend.bank(), config.bvft.noise_floor_factor);
    keypoints = detect_fast(image.intensity, config.bvft.fast_threshold, config.bvft.max_keypoints,
                            config.bvft.patch_size);
    a = frontend.describe(ca);
    b = frontend.describe(cb);
    training = stack_descriptors({a, b});
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_FilterResponses(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(filter_responses(f.image.intensity, f.frontend.bank()));
}

void BM_FilterResponsesSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(serial::filter_responses(f.image.intensity, f.frontend.bank()));
}

void BM_DescribeKeypoints(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(describe_keypoints(f.mim, f.keypoints, f.config.bvft));
}

void BM_DescribeKeypointsSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(serial::describe_keypoints(f.mim, f.keypoints, f.config.bvft));
}

void BM_MatchDescriptors(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(match_descriptors(f.a, f.b, f.config.match_ratio));
}

void BM_MatchDescriptorsSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(serial::match_descriptors(f.a, f.b, f.config.match_ratio));
}

void BM_TrainDictionary(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(train_dictionary(f.training, 64, 10, 1));
}

void BM_TrainDictionarySerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(serial::train_dictionary(f.training, 64, 10, 1));
}

}  // namespace

BENCHMARK(BM_FilterResponses)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FilterResponsesSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DescribeKeypoints)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DescribeKeypointsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatchDescriptors)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatchDescriptorsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainDictionary)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainDictionarySerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
