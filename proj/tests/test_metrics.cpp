// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "ghztof/metrics.hpp"

using namespace ghztof;
using Catch::Approx;

namespace {

Grid<int> ints(int h, int w, std::vector<int> v) {
  Grid<int> g(h, w);
  g.data = std::move(v);
  return g;
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("delta metrics examples") {
  const Grid<int> gt = ints(1, 4, {3, 4, 5, 6});
  const DeltaReport same = delta_metrics(gt, gt, full_mask(1, 4));
  CHECK(same.pct_delta0 == 100.0);
  CHECK(same.pct_delta_ge3 == 0.0);
  CHECK(same.valid_pixel_count == 4);

  const DeltaReport half = delta_metrics(ints(1, 4, {3, 5, 5, 5}), gt, full_mask(1, 4));
  CHECK(half.pct_delta0 == 50.0);
  CHECK(half.pct_delta_le1 == 100.0);

  const Grid<int> zero = ints(1, 5, {0, 0, 0, 0, 0});
  const DeltaReport mix = delta_metrics(ints(1, 5, {0, 1, -2, 3, 12}), zero, full_mask(1, 5));
  CHECK(mix.pct_delta0 == Approx(20.0));
  CHECK(mix.pct_delta_le1 == Approx(40.0));
  CHECK(mix.pct_delta_le2 == Approx(60.0));
  CHECK(mix.pct_delta_ge3 == Approx(40.0));
  CHECK(mix.pct_delta_ge10 == Approx(20.0));

  Mask m = full_mask(1, 5);
  m.data[4] = 0;
  const DeltaReport masked = delta_metrics(ints(1, 5, {0, 1, -2, 3, 12}), zero, m);
  CHECK(masked.pct_delta0 == 25.0);
  CHECK(masked.pct_delta_ge10 == 0.0);

  CHECK_THROWS_AS(delta_metrics(zero, zero, Mask(1, 5)), InvalidArgument);
  CHECK_THROWS_AS(delta_metrics(zero, gt, full_mask(1, 5)), ShapeMismatch);
}

TEST_CASE("delta metrics are invariant to pixel permutation") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(0, 20);
  Grid<int> pred(1, 200), gt(1, 200);
  for (std::size_t i = 0; i < 200; ++i) {
    pred.data[i] = d(rng);
    gt.data[i] = d(rng);
  }
  const DeltaReport a = delta_metrics(pred, gt, full_mask(1, 200));
  std::vector<std::size_t> perm(200);
  for (std::size_t i = 0; i < 200; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  Grid<int> p2(1, 200), g2(1, 200);
  for (std::size_t i = 0; i < 200; ++i) {
    p2.data[i] = pred.data[perm[i]];
    g2.data[i] = gt.data[perm[i]];
  }
  const DeltaReport b = delta_metrics(p2, g2, full_mask(1, 200));
  CHECK(a.pct_delta0 == b.pct_delta0);
  CHECK(a.pct_delta_le1 == b.pct_delta_le1);
  CHECK(a.pct_delta_le2 == b.pct_delta_le2);
  CHECK(a.pct_delta_ge3 == b.pct_delta_ge3);
  CHECK(a.pct_delta_ge10 == b.pct_delta_ge10);
  CHECK(a.pct_delta_le1 + a.pct_delta_ge3 + (a.pct_delta_le2 - a.pct_delta_le1) == Approx(100.0));
}

TEST_CASE("depth errors") {
  Grid<double> gt(3, 3, 1, 1.0), pred(3, 3, 1, 1.0 + 33.5e-6);
  const DepthErrors e = depth_errors(pred, gt, full_mask(3, 3));
  CHECK(e.rmse == Approx(33.5e-6));
  CHECK(e.mae == Approx(33.5e-6));
  CHECK(e.pixels == 9);

  Grid<double> pm(1, 4, 1, 0.0);
  pm.data = {10.0, -10.0, 10.0, -10.0};
  const DepthErrors f = depth_errors(pm, Grid<double>(1, 4), full_mask(1, 4));
  CHECK(f.rmse == 10.0);
  CHECK(f.mae == 10.0);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  Grid<double> r(8, 8);
  for (double &v : r.data) v = n(rng);
  const DepthErrors g = depth_errors(r, Grid<double>(8, 8), full_mask(8, 8));
  CHECK(g.rmse >= g.mae);
  CHECK_THROWS_AS(depth_errors(r, Grid<double>(8, 8), Mask(8, 8)), InvalidArgument);
}

TEST_CASE("plane fit") {
  Grid<double> z(12, 9);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 9; ++x) z(y, x) = 0.3 + 0.01 * x - 0.02 * y;
  const PlaneFit f = plane_fit_r2(z, full_mask(12, 9));
  CHECK(f.r2 == Approx(1.0).epsilon(1e-12));
  CHECK(f.a == Approx(0.01));
  CHECK(f.b == Approx(-0.02));
  CHECK(f.c == Approx(0.3));

  auto noisy = [&](std::uint64_t seed) {
    Grid<double> zn = z;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.01);
    for (double &v : zn.data) v += n(rng);
    return plane_fit_r2(zn, full_mask(12, 9)).r2;
  };
  CHECK(noisy(1) < 1.0);
  CHECK(noisy(1) == noisy(1));

  CHECK_THROWS_AS(plane_fit_r2(Grid<double>(5, 5, 1, 2.0), full_mask(5, 5)), InvalidArgument);
  CHECK_THROWS_AS(plane_fit_r2(z, Mask(12, 9)), InvalidArgument);
  Mask line(12, 9);
  for (int y = 0; y < 12; ++y) line(y, 4) = 1;
  CHECK_THROWS_AS(plane_fit_r2(z, line), InvalidArgument);
}

TEST_CASE("precision sweep without noise") {
  PrecisionSweepConfig cfg;
  cfg.noise = NoiseParams::none();
  cfg.adc_bits = 0;
  cfg.samples = 10;
  const std::vector<double> om{1e8, 1e9, 7.15e9};
  const auto pts = precision_sweep(om, cfg);
  REQUIRE(pts.size() == 3);
  for (const auto &p : pts) {
    CHECK(p.std_m < 1e-12);
    CHECK(p.mean_m == Approx(0.01).margin(1e-12));
  }
}

TEST_CASE("precision scales as the inverse of frequency") {
  PrecisionSweepConfig cfg;
  cfg.noise.shot = ShotNoise::None;
  cfg.noise.sigma = 2000.0;
  cfg.adc_bits = 0;
  cfg.samples = 4000;
  cfg.seed = 9;
  const std::vector<double> om{1e8, 1e9, 1e10};
  const auto pts = precision_sweep(om, cfg);
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i - 1].std_m / pts[i].std_m == Approx(10.0).epsilon(0.06));

  // Analytic calibration reproduces the requested depth std.
  PrecisionSweepConfig cal = cfg;
  cal.noise.shot = ShotNoise::Skellam;
  cal.noise.sigma = calibrate_sigma(1e-3, 1e8, cal);
  CHECK(cal.noise.sigma == Approx(5578.0).epsilon(1e-3));
  const double om1[] = {1e8};
  CHECK(precision_sweep(om1, cal)[0].std_m == Approx(1e-3).epsilon(0.05));
  CHECK_THROWS_AS(calibrate_sigma(1e-9, 1e8, cal), InvalidArgument);

  // Verbatim Poisson doubles the signal; calibration accounts for it.
  cal.noise.shot = ShotNoise::Poisson;
  cal.noise.sigma = calibrate_sigma(1e-3, 1e8, cal);
  CHECK(precision_sweep(om1, cal)[0].std_m == Approx(1e-3).epsilon(0.05));
  cal.noise.recenter = true;
  cal.noise.sigma = calibrate_sigma(1e-3, 1e8, cal);
  CHECK(precision_sweep(om1, cal)[0].std_m == Approx(1e-3).epsilon(0.05));

  PrecisionSweepConfig bad;
  bad.samples = 1;
  CHECK_THROWS_AS(precision_sweep(om, bad), InvalidArgument);
}

TEST_CASE("report writers") {
  DeltaReport d;
  d.pct_delta0 = 87.5;
  d.pct_delta_le1 = 100.0;
  d.pct_delta_le2 = 100.0;
  d.valid_pixel_count = 8;
  const std::vector<ReportRow> rows{{"crt", d, {0.5, 0.25, 8}}};
  CHECK(report_csv(rows) ==
        "method,delta0,delta_le1,delta_le2,delta_ge3,delta_ge10,rmse_mm,mae_mm,pixels\n"
        "crt,87.5000,100.0000,100.0000,0.0000,0.0000,0.500000,0.250000,8\n");
  const std::vector<PrecisionPoint> pts{{1e9, 0.01, 2e-4, 0}};
  CHECK(precision_csv(pts) == "omega_hz,mean_m,std_m\n1.000000e+09,1.000000000e-02,2.000000000e-04\n");

  const auto dir = std::filesystem::temp_directory_path() / "ghztof_test_metrics";
  std::filesystem::create_directories(dir);
  Grid<double> v(2, 3);
  v.data = {0.0, 0.5, 1.0, 2.0, -1.0, 0.25};
  Mask m = full_mask(2, 3);
  m.data[5] = 0;
  write_pgm(dir / "a.pgm", v, m, 0.0, 1.0);
  const std::string pgm = slurp(dir / "a.pgm");
  const std::string head = "P5\n3 2\n255\n";
  REQUIRE(pgm.size() == head.size() + 6);
  CHECK(pgm.substr(0, head.size()) == head);
  const std::vector<unsigned char> px(pgm.begin() + static_cast<long>(head.size()), pgm.end());
  CHECK(px == std::vector<unsigned char>{0, 128, 255, 255, 0, 0});

  write_delta_ppm(dir / "d.ppm", ints(1, 3, {0, 1, 20}), ints(1, 3, {0, 0, 0}), full_mask(1, 3));
  const std::string ppm = slurp(dir / "d.ppm");
  REQUIRE(ppm.size() == std::string("P6\n3 1\n255\n").size() + 9);
  CHECK(static_cast<unsigned char>(ppm[ppm.size() - 9 + 1]) == 200);
  CHECK(static_cast<unsigned char>(ppm[ppm.size() - 3]) == 220);
  CHECK(static_cast<unsigned char>(ppm[ppm.size() - 1]) == 220);
}
