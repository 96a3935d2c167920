// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <vector>

#include "bvmatch/bvimage.hpp"
#include "test_util.hpp"

using namespace bvmatch;
using bvmatch::testing::TempDir;

namespace {

DensityGrid grid_with(const std::vector<std::uint32_t>& occupied, int side = 20) {
  DensityGrid g;
  g.counts = Grid<std::uint32_t>(side, side, 0);
  for (std::size_t i = 0; i < occupied.size(); ++i) g.counts.data()[i * 2] = occupied[i];
  return g;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Pixels after the P5 header "P5\n<w> <h>\n255\n".
std::vector<unsigned char> pgm_pixels(const std::filesystem::path& p, int& w, int& h) {
  const auto bytes = read_bytes(p);
  std::string head(bytes.begin(), bytes.begin() + std::min<std::size_t>(bytes.size(), 32));
  int maxval = 0;
  int consumed = 0;
  REQUIRE(std::sscanf(head.c_str(), "P5 %d %d %d%n", &w, &h, &maxval, &consumed) == 3);
  CHECK(maxval == 255);
  return {bytes.begin() + consumed + 1, bytes.end()};
}

// Bilinear sample with cell centers at integer + 0.5; zero outside.
double sample(const Grid<double>& img, double u, double v) {
  const double fu = u - 0.5;
  const double fv = v - 0.5;
  const int u0 = static_cast<int>(std::floor(fu));
  const int v0 = static_cast<int>(std::floor(fv));
  const double a = fu - u0;
  const double b = fv - v0;
  auto at = [&](int uu, int vv) { return img.contains(uu, vv) ? img(uu, vv) : 0.0; };
  return (1 - a) * (1 - b) * at(u0, v0) + a * (1 - b) * at(u0 + 1, v0) + (1 - a) * b * at(u0, v0 + 1) +
         a * b * at(u0 + 1, v0 + 1);
}

}  // namespace

TEST_SUITE("bvimage") {

TEST_CASE("ten points in one cell") {
  PointCloud c;
  for (int i = 0; i < 10; ++i) c.points.push_back({1.1, 2.1, 0.1 * i});
  const auto g = density_grid(c, 0.4, 50.0);
  REQUIRE(g.counts.width() == 250);
  const int u = static_cast<int>(std::floor((1.1 + 50) / 0.4));
  const int v = static_cast<int>(std::floor((50 - 2.1) / 0.4));
  CHECK(g.counts(u, v) == 10);
  std::uint64_t total = 0;
  for (auto n : g.counts.data()) total += n;
  CHECK(total == 10);
}

TEST_CASE("empty cloud gives an all-zero grid") {
  const auto g = density_grid(PointCloud{}, 0.4, 50.0);
  CHECK(std::all_of(g.counts.data().begin(), g.counts.data().end(), [](auto n) { return n == 0; }));
  CHECK_THROWS_WITH(percentile99(g), "empty BV window");
  CHECK_THROWS_WITH(build_bv_image(PointCloud{}, 0.4, 50.0), "empty BV window");
  CHECK_THROWS_AS(density_grid(PointCloud{}, 0.0, 50.0), Error);
  CHECK_THROWS_AS(density_grid(PointCloud{}, 0.4, -1.0), Error);
}

TEST_CASE("axis orientation and the +C boundary") {
  PointCloud c;
  c.points = {{-50, 50, 0}, {50, -50, 0}, {-49.9, -49.9, 0}};
  const auto g = density_grid(c, 0.4, 50.0);
  CHECK(g.counts(0, 0) == 1);
  CHECK(g.counts(249, 249) == 1);
  CHECK(g.counts(0, 249) == 1);
}

TEST_CASE("binning matches a per-point oracle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-60, 60);
  PointCloud c;
  for (int i = 0; i < 5000; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  const double g = 0.4;
  const double half = 50.0;
  const int d = 250;
  std::vector<std::uint32_t> oracle(static_cast<std::size_t>(d * d), 0);
  std::size_t inside = 0;
  for (const auto& p : c.points) {
    if (p.x < -half || p.x > half || p.y < -half || p.y > half) continue;
    ++inside;
    int col = std::min(d - 1, static_cast<int>((p.x + half) / g));
    int row = std::min(d - 1, static_cast<int>((half - p.y) / g));
    ++oracle[static_cast<std::size_t>(row * d + col)];
  }
  const auto grid = density_grid(c, g, half);
  CHECK(grid.counts.data() == oracle);
  std::size_t total = 0;
  for (auto n : grid.counts.data()) total += n;
  CHECK(total == inside);
}

TEST_CASE("percentile99 nearest rank") {
  std::vector<std::uint32_t> v;
  for (std::uint32_t i = 1; i <= 100; ++i) v.push_back(i);
  std::shuffle(v.begin(), v.end(), std::mt19937_64(2));
  CHECK(percentile99(grid_with(v)) == 99);
  CHECK(percentile99(grid_with(std::vector<std::uint32_t>(50, 7))) == 7);
  CHECK(percentile99(grid_with({3})) == 3);
}

TEST_CASE("percentile99 matches a sorted-list oracle") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 150);
    std::vector<std::uint32_t> v;
    for (int i = 0; i < n; ++i) v.push_back(1 + static_cast<std::uint32_t>(rng() % 40));
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.99 * n - 1e-12));
    CHECK(percentile99(grid_with(v)) == sorted[std::max<std::size_t>(rank, 1) - 1]);
  }
}

TEST_CASE("default geometry is 250 by 250") {
  CHECK(BvGeometry{}.side() == 250);
  PointCloud c;
  c.points = {{0, 0, 0}};
  const auto img = build_bv_image(c, 0.4, 50.0);
  CHECK(img.side() == 250);
  CHECK(img.intensity.height() == 250);
  CHECK(BvGeometry{0.3, 50.0}.side() == 334);
}

TEST_CASE("intensity saturates at Nm") {
  // 100 singly-occupied cells, one with count 1 (Nm = 1), plus one with 2.
  PointCloud c;
  for (int i = 0; i < 100; ++i) c.points.push_back({-40.0 + 0.8 * i, 0.1, 0});
  c.points.push_back({30.1, 30.1, 0});
  c.points.push_back({30.1, 30.1, 0});
  const auto img = build_bv_image(c, 0.4, 50.0);
  const BvGeometry& geo = img.geometry;
  CHECK(img.intensity(static_cast<int>(geo.u_of(-40.0)), static_cast<int>(geo.v_of(0.1))) == 1.0);
  CHECK(img.intensity(static_cast<int>(geo.u_of(30.1)), static_cast<int>(geo.v_of(30.1))) == 1.0);
}

TEST_CASE("image matches the elementwise oracle") {
  const auto cloud = bvmatch::testing::urban_scan(31, 1);
  const auto grid = density_grid(cloud, 0.4, 50.0);
  const double nm = percentile99(grid);
  const auto img = normalize_density(grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.counts.size(); ++i) {
    const double expect = std::min<double>(grid.counts.data()[i], nm) / nm;
    worst = std::max(worst, std::abs(img.intensity.data()[i] - expect));
  }
  CHECK(worst <= 1e-12);
  const auto direct = build_bv_image(cloud, 0.4, 50.0);
  CHECK(direct.intensity == img.intensity);
}

TEST_CASE("pgm encoding") {
  TempDir dir("bv");
  Grid<double> g(4, 3, 0.0);
  render_pgm(g, dir / "zero.pgm");
  int w = 0;
  int h = 0;
  auto px = pgm_pixels(dir / "zero.pgm", w, h);
  CHECK(w == 4);
  CHECK(h == 3);
  REQUIRE(px.size() == 12);
  CHECK(std::all_of(px.begin(), px.end(), [](unsigned char b) { return b == 0; }));

  g(0, 0) = 1.0;
  g(1, 0) = 0.5;
  g(2, 0) = 0.25;
  g(3, 2) = 0.999;
  render_pgm(g, dir / "mix.pgm");
  px = pgm_pixels(dir / "mix.pgm", w, h);
  REQUIRE(px.size() == 12);
  CHECK(px[0] == 255);
  CHECK(px[1] == 128);
  CHECK(px[2] == 64);
  CHECK(px[11] == 255);
  CHECK_THROWS_AS(render_pgm(g, dir / "no/such/dir/x.pgm"), Error);
}

TEST_CASE("csv export has one row per image row") {
  TempDir dir("bv");
  PointCloud c;
  c.points = {{0, 0, 0}};
  const auto img = build_bv_image(c, 10.0, 20.0);
  write_csv(img, dir / "img.csv");
  std::ifstream in(dir / "img.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 3);
    ++rows;
  }
  CHECK(rows == 4);
}

TEST_CASE("rotating the cloud rotates the image") {
  const auto cloud = bvmatch::testing::urban_scan(41, 2);
  const auto base = make_bv_image(cloud, 0.4, 50.0);
  const BvGeometry& geo = base.geometry;
  for (double deg : {17.0, 45.0, 90.0, 150.0}) {
    const double th = deg * std::numbers::pi / 180.0;
    const auto rotated = make_bv_image(transform_cloud(cloud, Pose2D(0, 0, th)), 0.4, 50.0);
    const double c = std::cos(th);
    const double s = std::sin(th);
    double sum = 0.0;
    std::size_t n = 0;
    for (int v = 0; v < rotated.side(); ++v) {
      for (int u = 0; u < rotated.side(); ++u) {
        const double x = geo.x_of(u + 0.5);
        const double y = geo.y_of(v + 0.5);
        if (std::hypot(x, y) > 45.0) continue;
        const double x0 = c * x + s * y;
        const double y0 = -s * x + c * y;
        sum += std::abs(rotated.intensity(u, v) - sample(base.intensity, geo.u_of(x0), geo.v_of(y0)));
        ++n;
      }
    }
    const double mae = sum / static_cast<double>(n);
    INFO("rotation " << deg << " deg, MAE " << mae);
    CHECK(mae <= 0.02);
  }
}

}  // TEST_SUITE
