// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <random>

#include "ghztof/correlation.hpp"

using namespace ghztof;
using Catch::Approx;

TEST_CASE("homodyne correlation spot values") {
  const SignalParams s{2.0, 0.0, 0.4, 1e9};
  CHECK(homodyne_correlation(s, 0.4, 5.0) == Approx(6.0));
  CHECK(homodyne_correlation(s, 0.4 + kPi, 5.0) == Approx(4.0));
  CHECK(homodyne_correlation(s, 1.0, 5.0) == Approx(5.0 + std::cos(0.6)).epsilon(1e-15));
}

TEST_CASE("four bucket phase") {
  auto buckets = [](double phi) {
    const SignalParams s{3.0, 0.0, phi, 1e9};
    return std::array<double, 4>{homodyne_correlation(s, 0.0, 4.0), homodyne_correlation(s, kPi / 2, 4.0),
                                 homodyne_correlation(s, kPi, 4.0), homodyne_correlation(s, 3 * kPi / 2, 4.0)};
  };
  auto b0 = buckets(0.0);
  CHECK(four_bucket_phase(b0[0], b0[1], b0[2], b0[3]) == Approx(0.0).margin(1e-12));
  auto b1 = buckets(kPi / 3);
  CHECK(four_bucket_phase(b1[0], b1[1], b1[2], b1[3]) == Approx(kPi / 3).epsilon(1e-12));
  CHECK_THROWS_AS(four_bucket_phase(2.0, 2.0, 2.0, 2.0), DegenerateAmplitude);
}

TEST_CASE("dft estimate") {
  const auto grid = uniform_psi_grid(16);
  std::vector<double> flat(16, 3.5);
  const RecoveredPixel c = dft_phase_estimate(flat, grid);
  CHECK(c.amplitude == Approx(0.0).margin(1e-12));
  CHECK(c.bias == Approx(3.5));

  std::vector<double> s;
  for (double p : grid) s.push_back(std::cos(p - 1.234) + 7.0);
  const RecoveredPixel r = dft_phase_estimate(s, grid);
  CHECK(r.phase == Approx(1.234).margin(1e-9));
  CHECK(r.amplitude == Approx(1.0).margin(1e-9));
  CHECK(r.bias == Approx(7.0).margin(1e-9));

  CHECK_THROWS_AS(dft_phase_estimate(std::vector<double>{1, 2}, std::vector<double>{0, kPi}), InvalidArgument);
  std::vector<double> bad{0.0, 1.0, 2.0, 3.0};
  CHECK_THROWS_AS(dft_phase_estimate(std::vector<double>{1, 2, 3, 4}, bad), InvalidArgument);
  CHECK_THROWS_AS(dft_phase_estimate(std::vector<double>{1, 2, 3}, grid), ShapeMismatch);
}

TEST_CASE("dft with four samples matches four bucket phase") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  const auto grid = uniform_psi_grid(4);
  for (int i = 0; i < 200; ++i) {
    const SignalParams sig{1.5, 0.0, u(rng), 1e9};
    std::vector<double> s;
    for (double p : grid) s.push_back(homodyne_correlation(sig, p, 2.0));
    const double a = dft_phase_estimate(s, grid).phase, b = four_bucket_phase(s[0], s[1], s[2], s[3]);
    REQUIRE(std::abs(wrap_to_pi(a - b)) < 1e-12);
  }
}

TEST_CASE("dft recovery is exact and scale invariant") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, kTwoPi), amp(0.01, 10.0), off(0.0, 20.0);
  for (int n : {4, 8, 16}) {
    const auto grid = uniform_psi_grid(n);
    for (int i = 0; i < 300; ++i) {
      const SignalParams sig{amp(rng), 0.0, u(rng), 1e9};
      const double bias = off(rng) + sig.alpha;
      std::vector<double> s, s3;
      for (double p : grid) {
        s.push_back(homodyne_correlation(sig, p, bias));
        s3.push_back(3.0 * s.back());
      }
      const RecoveredPixel r = dft_phase_estimate(s, grid), r3 = dft_phase_estimate(s3, grid);
      REQUIRE(std::abs(wrap_to_pi(r.phase - sig.phi)) <= 1e-9);
      REQUIRE(r.amplitude == Approx(sig.alpha / 2).epsilon(1e-9));
      REQUIRE(std::abs(wrap_to_pi(r3.phase - r.phase)) <= 1e-12);
      REQUIRE(r3.amplitude == Approx(3.0 * r.amplitude).epsilon(1e-12));
      REQUIRE(r.phase >= 0.0);
      REQUIRE(r.phase < kTwoPi);
    }
  }
}

TEST_CASE("noise: zero parameters pass values through") {
  Rng rng(1);
  NoiseParams n = NoiseParams::none();
  CHECK(apply_noise(123.25, n, rng).value == 123.25);
  n.mu = 2.0;
  CHECK(apply_noise(0.0, n, rng).value == 2.0);
  const NoisySample neg = apply_noise(-4.0, NoiseParams{}, rng);
  CHECK(neg.clamped);
  CHECK(neg.value == -4.0);
}

TEST_CASE("noise: Poisson sample is added to the value") {
  Rng rng(2);
  NoiseParams n; // Poisson, no Gaussian
  double sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) sum += apply_noise(1e6, n, rng).value;
  CHECK(sum / draws == Approx(2e6).epsilon(0.01));

  n.recenter = true;
  sum = 0.0;
  for (int i = 0; i < 20000; ++i) sum += apply_noise(1e6, n, rng).value;
  CHECK(sum / 20000 == Approx(1e6).epsilon(0.001));
}

TEST_CASE("noise: Gaussian read noise std") {
  Rng rng(3);
  NoiseParams n{0.0, 1200.0, 20.0, 1000.0, ShotNoise::Poisson, false};
  double s1 = 0.0, s2 = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double v = apply_noise(0.0, n, rng).value;
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / draws, sd = std::sqrt(s2 / draws - mean * mean);
  CHECK(sd == Approx(1200.0).epsilon(0.02));
}

TEST_CASE("noise: Skellam is zero mean with variance 2 lambda") {
  Rng rng(4);
  NoiseParams n;
  n.shot = ShotNoise::Skellam;
  double s1 = 0.0, s2 = 0.0;
  const int draws = 50000;
  for (int i = 0; i < draws; ++i) {
    const double v = apply_noise(500.0, n, rng).value - 500.0;
    s1 += v;
    s2 += v * v;
  }
  CHECK(std::abs(s1 / draws) < 1.0);
  CHECK(s2 / draws == Approx(1000.0).epsilon(0.05));
}

TEST_CASE("noise is reproducible for a seed") {
  NoiseParams n{1.0, 5.0, 1.0, 1.0, ShotNoise::Poisson, false};
  Rng a(77), b(77);
  for (int i = 0; i < 1000; ++i) REQUIRE(apply_noise(40.0 + i, n, a).value == apply_noise(40.0 + i, n, b).value);
}

TEST_CASE("quantizer") {
  const AdcConfig adc{14, 1.0};
  CHECK(quantize(1.0, adc) == 16383u);
  CHECK(quantize(2.0, adc) == 16383u);
  CHECK(quantize(-0.5, adc) == 0u);
  const auto mid = quantize(0.5, adc);
  CHECK(mid >= 8191u);
  CHECK(mid <= 8193u);
  // Ties to even.
  const AdcConfig small{2, 3.0}; // codes 0..3, one LSB per unit
  CHECK(quantize(0.5, small) == 0u);
  CHECK(quantize(1.5, small) == 2u);
  CHECK(quantize(2.5, small) == 2u);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  std::vector<double> v(2000);
  for (double &x : v) x = u(rng);
  std::sort(v.begin(), v.end());
  for (std::size_t i = 1; i < v.size(); ++i) REQUIRE(quantize(v[i - 1], adc) <= quantize(v[i], adc));
  for (std::uint32_t code = 0; code <= adc.max_code(); code += 97)
    REQUIRE(quantize(dequantize(code, adc), adc) == code);

  CHECK_THROWS_AS(quantize(0.5, AdcConfig{0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(quantize(0.5, AdcConfig{25, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(quantize(0.5, AdcConfig{14, 0.0}), InvalidArgument);
}

TEST_CASE("depth and phase conversion") {
  CHECK(depth_from_phase(0.0, 1e10) == 0.0);
  CHECK(depth_from_phase(kTwoPi, 10e9) == Approx(0.0149896229).epsilon(1e-9));
  CHECK(phase_from_depth(2.0, 7.15e9) / kTwoPi == Approx(95.4).margin(0.05));
  CHECK(wrap_distance(7.15e9) == Approx(0.020964).margin(1e-6));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> z(0.0, 10.0), w(1e6, 5e10);
  for (int i = 0; i < 1000; ++i) {
    const double zz = z(rng), ww = w(rng);
    REQUIRE(depth_from_phase(phase_from_depth(zz, ww), ww) == Approx(zz).epsilon(1e-12));
  }
  CHECK_THROWS_AS(depth_from_phase(1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(phase_from_depth(1.0, -1.0), InvalidArgument);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS((NoiseParams{0.0, -1.0, 1.0, 1.0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((NoiseParams{0.0, 1.0, 0.0, 1.0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((NoiseParams{0.0, 1.0, 1.0, 0.0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((SignalParams{-1.0, 0.0, 0.0, 1.0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((SignalParams{1.0, 0.0, 0.0, 0.0}.validate()), InvalidArgument);
}
