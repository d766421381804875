// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <random>

#include "ghztof/unwrap_classical.hpp"

using namespace ghztof;
using Catch::Approx;

namespace {

const FrequencyPair kPair{7.15e9, 2.0 * (7.15e9 + 10e6)};

RecoveredMaps maps_for(const Grid<double> &depth_m, double omega) {
  RecoveredMaps m;
  m.phase = Grid<double>(depth_m.height, depth_m.width);
  m.amplitude = Grid<double>(depth_m.height, depth_m.width, 1, 1.0);
  m.bias = Grid<double>(depth_m.height, depth_m.width, 1, 2.0);
  m.valid = full_mask(depth_m.height, depth_m.width);
  m.frequency = omega;
  for (std::size_t i = 0; i < depth_m.data.size(); ++i) m.phase.data[i] = wrap_to_2pi(phase_from_depth(depth_m.data[i], omega));
  return m;
}

Grid<double> tilted(int h, int w, double z0, double gx, double gy) {
  Grid<double> z(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) z(y, x) = z0 + gx * x + gy * y;
  return z;
}

int true_wraps(double z, double omega) { return static_cast<int>(std::floor(phase_from_depth(z, omega) / kTwoPi)); }

} // namespace

TEST_CASE("crt residual") {
  CHECK(crt_residual(0.0, 0.0, kPair, 0, 0) == 0.0);
  const double z = 0.731;
  const double p1 = wrap_to_2pi(phase_from_depth(z, kPair.omega1)), p2 = wrap_to_2pi(phase_from_depth(z, kPair.omega2));
  const int n1 = true_wraps(z, kPair.omega1), n2 = true_wraps(z, kPair.omega2);
  CHECK(std::abs(crt_residual(p1, p2, kPair, n1, n2)) < 1e-9);
  // Any other candidate is off by at least 2 pi times the smallest gap |a - k b|.
  const double gap = kTwoPi * std::abs(1.0 - 2.0 * kPair.k());
  for (int a = 0; a <= 40; ++a)
    for (int b = 0; b <= 82; ++b)
      if (a != n1 || b != n2) REQUIRE(std::abs(crt_residual(p1, p2, kPair, a, b)) >= gap - 1e-9);
}

TEST_CASE("crt pixel on noiseless data") {
  const CandidateRange range{0, 96};
  const CrtSolution zero = crt_unwrap_pixel(0.0, 0.0, kPair, range);
  CHECK(zero.n1 == 0);
  CHECK(zero.n2 == 0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> zd(0.0, 2.0);
  for (int i = 0; i < 2000; ++i) {
    const double z = zd(rng);
    const double p1 = wrap_to_2pi(phase_from_depth(z, kPair.omega1)), p2 = wrap_to_2pi(phase_from_depth(z, kPair.omega2));
    for (auto mode : {CrtSearch::Reduced, CrtSearch::Exhaustive}) {
      const CrtSolution s = crt_unwrap_pixel(p1, p2, kPair, range, mode);
      REQUIRE(s.n1 == true_wraps(z, kPair.omega1));
      REQUIRE(s.n2 == true_wraps(z, kPair.omega2));
      REQUIRE(std::abs(wrap_to_pi(s.unwrapped - p1)) < 1e-9);
      REQUIRE(depth_from_phase(s.unwrapped, kPair.omega1) == Approx(z).margin(1e-9));
    }
  }
}

TEST_CASE("reduced search equals exhaustive search on noisy pixels too") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  const CandidateRange range{3, 40};
  for (int i = 0; i < 2000; ++i) {
    const double p1 = u(rng), p2 = u(rng);
    const CrtSolution a = crt_unwrap_pixel(p1, p2, kPair, range, CrtSearch::Reduced);
    const CrtSolution b = crt_unwrap_pixel(p1, p2, kPair, range, CrtSearch::Exhaustive);
    REQUIRE(a.n1 == b.n1);
    REQUIRE(a.n2 == b.n2);
  }
}

TEST_CASE("ties go to the smallest candidate") {
  // Equal frequencies are rejected, so use a symmetric construction: with k = 1/2
  // and phases zero, (n1, n2) = (0, 0) and (1, 2) both give residual zero.
  const FrequencyPair half{1e9, 2e9};
  const CrtSolution s = crt_unwrap_pixel(0.0, 0.0, half, {0, 5}, CrtSearch::Exhaustive);
  CHECK(s.n1 == 0);
  CHECK(s.n2 == 0);
  const CrtSolution r = crt_unwrap_pixel(0.0, 0.0, half, {0, 5}, CrtSearch::Reduced);
  CHECK(r.n1 == 0);
  CHECK(r.n2 == 0);
}

TEST_CASE("candidate range and pair validation") {
  CHECK_THROWS_AS(crt_unwrap_pixel(0.0, 0.0, kPair, {5, 2}), InvalidArgument);
  CHECK_THROWS_AS(crt_unwrap_pixel(0.0, 0.0, FrequencyPair{1e9, 1e9}, {0, 2}), InvalidArgument);
  CHECK_THROWS_AS((CandidateRange{-1, 3}.validate()), InvalidArgument);
  const CandidateRange r = CandidateRange::for_depths(0.0, 2.0, 7.15e9);
  CHECK(r.min_wrap == 0);
  CHECK(r.max_wrap == 95);
  CHECK(r.size() == 96);
}

TEST_CASE("crt map recovers a noiseless scene") {
  const Grid<double> z = tilted(24, 30, 0.2, 0.004, 0.003);
  const auto m1 = maps_for(z, kPair.omega1), m2 = maps_for(z, kPair.omega2);
  const UnwrapResult r = crt_unwrap_map(m1, m2, kPair, {0, 30});
  for (std::size_t i = 0; i < z.data.size(); ++i) {
    REQUIRE(r.wraps.data[i] == true_wraps(z.data[i], kPair.omega1));
    REQUIRE(r.depth_m.data[i] == Approx(z.data[i]).margin(1e-9));
  }
  RecoveredMaps small = m2;
  small.phase = Grid<double>(3, 3);
  CHECK_THROWS_AS(crt_unwrap_map(m1, small, kPair, {0, 30}), ShapeMismatch);
}

TEST_CASE("kde equals crt on clean data and with window 1") {
  const Grid<double> z = tilted(20, 20, 0.05, 0.006, 0.002);
  const auto m1 = maps_for(z, kPair.omega1), m2 = maps_for(z, kPair.omega2);
  const UnwrapResult crt = crt_unwrap_map(m1, m2, kPair, {0, 20});
  CHECK(kde_unwrap_map(m1, m2, kPair, {0, 20}).wraps.data == crt.wraps.data);
  KdeParams one;
  one.window = 1;
  CHECK(kde_unwrap_map(m1, m2, kPair, {0, 20}, one).wraps.data == crt.wraps.data);
}

TEST_CASE("kde corrects an isolated outlier") {
  const Grid<double> z(15, 15, 1, 0.2);
  auto m1 = maps_for(z, kPair.omega1), m2 = maps_for(z, kPair.omega2);
  m2.phase(7, 7) = wrap_to_2pi(m2.phase(7, 7) + 2.0);
  const int truth = true_wraps(0.2, kPair.omega1);
  const UnwrapResult crt = crt_unwrap_map(m1, m2, kPair, {0, 20});
  REQUIRE(crt.wraps(7, 7) != truth);
  const UnwrapResult kde = kde_unwrap_map(m1, m2, kPair, {0, 20});
  CHECK(kde.wraps(7, 7) == truth);
  for (int v : kde.wraps.data) CHECK(v == truth);
}

TEST_CASE("kde parameter validation") {
  const Grid<double> z(8, 8, 1, 0.1);
  const auto m1 = maps_for(z, kPair.omega1), m2 = maps_for(z, kPair.omega2);
  KdeParams p;
  p.window = 4;
  CHECK_THROWS_AS(kde_unwrap_map(m1, m2, kPair, {0, 5}, p), InvalidArgument);
  p.window = 11;
  CHECK_THROWS_AS(kde_unwrap_map(m1, m2, kPair, {0, 5}, p), InvalidArgument);
  p.window = 3;
  p.sigma_hyp = 0.0;
  CHECK_THROWS_AS(kde_unwrap_map(m1, m2, kPair, {0, 5}, p), InvalidArgument);
}

TEST_CASE("phasor unwrapping") {
  const double w1 = 7.15e9, delta = 10e6;
  CHECK(beat_range(delta) == Approx(14.99).margin(0.01));
  const PhasorSolution zero = phasor_unwrap_pixel(0.0, 0.0, w1, delta, 2.0);
  CHECK(zero.n1 == 0);
  CHECK(zero.depth_m == 0.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> zd(0.0, 2.0);
  for (int i = 0; i < 500; ++i) {
    const double z = zd(rng);
    const double p1 = wrap_to_2pi(phase_from_depth(z, w1)), p2 = wrap_to_2pi(phase_from_depth(z, w1 + delta));
    const PhasorSolution s = phasor_unwrap_pixel(p1, p2, w1, delta, 2.0);
    REQUIRE(s.n1 == true_wraps(z, w1));
    REQUIRE(s.depth_m == Approx(z).margin(1e-9));
  }
  CHECK_THROWS_AS(phasor_unwrap_pixel(0.0, 0.0, w1, delta, 20.0), InvalidArgument);
  CHECK_THROWS_AS(phasor_unwrap_pixel(0.0, 0.0, w1, 0.0, 1.0), InvalidArgument);

  const Grid<double> z = tilted(10, 10, 0.3, 0.01, 0.02);
  const UnwrapResult r = phasor_unwrap(maps_for(z, w1), maps_for(z, w1 + delta), delta, 2.0);
  for (std::size_t i = 0; i < z.data.size(); ++i) REQUIRE(r.depth_m.data[i] == Approx(z.data[i]).margin(1e-9));
}

TEST_CASE("sequential unwrapping") {
  const std::vector<double> flat(10, 1.3);
  CHECK(sequential_unwrap(flat) == flat);

  std::vector<double> ramp, truth;
  for (int i = 0; i < 12; ++i) {
    truth.push_back(5.0 + 0.2 * i);
    ramp.push_back(wrap_to_2pi(truth.back()));
  }
  const auto once = sequential_unwrap(ramp);
  int steps = 0;
  for (std::size_t i = 1; i < once.size(); ++i)
    if (std::abs(once[i] - ramp[i]) > 1.0 && std::abs(once[i - 1] - ramp[i - 1]) < 1.0) ++steps;
  CHECK(steps == 1);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i] - once[0] == Approx(truth[i] - truth[0]).margin(1e-12));

  std::vector<double> five, five_truth;
  for (int i = 0; i <= 100; ++i) {
    five_truth.push_back(5.0 * kTwoPi * i / 100.0);
    five.push_back(wrap_to_2pi(five_truth.back()));
  }
  const auto u = sequential_unwrap(five);
  for (std::size_t i = 0; i < u.size(); ++i) REQUIRE(u[i] == Approx(five_truth[i]).margin(1e-9));
}
