// SPDX-License-Identifier: Apache-2.0
#pragma once

// Homodyne AMCW correlation model: analytic correlation values, sensor noise,
// ADC quantization and per-pixel phase/amplitude/bias recovery.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ghztof/common.hpp"

namespace ghztof {

using Rng = std::mt19937_64;

struct SignalParams {
  double alpha = 1.0; // returned amplitude
  double beta = 0.0;  // returned bias
  double phi = 0.0;   // travel phase (rad)
  double omega = 1.0; // modulation frequency (Hz)

  void validate() const {
    if (!(alpha >= 0.0)) throw InvalidArgument("SignalParams: alpha must be >= 0");
    if (!(omega > 0.0)) throw InvalidArgument("SignalParams: omega must be > 0");
  }
};

/// Shot-noise term added on top of the Gaussian read noise.
enum class ShotNoise {
  None,
  Poisson, // sensor without photon bucketing
  Skellam, // difference of two Poisson draws, bucketed imagers (comparison mode)
};

struct NoiseParams {
  double mu = 0.0;
  double sigma = 0.0;
  double gain = 1.0;     // G
  double exposure = 1.0; // T (ms)
  ShotNoise shot = ShotNoise::Poisson;
  // When set, the Poisson term is re-centered (sample - lambda) so the measured
  // value stays unbiased. Off by default: the shot sample is added to C verbatim.
  bool recenter = false;

  void validate() const {
    if (!(sigma >= 0.0)) throw InvalidArgument("NoiseParams: sigma must be >= 0");
    if (!(gain > 0.0)) throw InvalidArgument("NoiseParams: gain must be > 0");
    if (!(exposure > 0.0)) throw InvalidArgument("NoiseParams: exposure must be > 0");
  }

  static NoiseParams none() {
    NoiseParams n;
    n.shot = ShotNoise::None;
    return n;
  }
};

struct AdcConfig {
  int bits = 14;
  double full_scale = 1.0;

  void validate() const {
    if (bits < 1 || bits > 24) throw InvalidArgument("AdcConfig: bits must be in [1, 24]");
    if (!(full_scale > 0.0)) throw InvalidArgument("AdcConfig: full_scale must be > 0");
  }
  std::uint32_t max_code() const { return (std::uint32_t{1} << bits) - 1u; }
  double lsb() const { return full_scale / static_cast<double>(max_code()); }
};

struct RecoveredPixel {
  double phase = 0.0;     // wrapped, [0, 2pi)
  double amplitude = 0.0; // >= 0
  double bias = 0.0;      // >= 0
};

/// C_psi = alpha/2 cos(psi - phi) + T K, with the exposure-integrated offset passed as `offset`.
inline double homodyne_correlation(const SignalParams &sig, double psi, double offset) {
  return 0.5 * sig.alpha * std::cos(psi - sig.phi) + offset;
}

/// Wrapped phase from four buckets at psi = 0, pi/2, pi, 3pi/2.
///
/// Uses atan2 of the quadrature differences, (C90 - C270, C0 - C180); this
/// inverts homodyne_correlation exactly. Throws DegenerateAmplitude when both
/// differences vanish relative to the bias.
inline double four_bucket_phase(double c0, double c90, double c180, double c270) {
  const double in_phase = c0 - c180;
  const double quadrature = c90 - c270;
  const double bias = 0.25 * std::abs(c0 + c90 + c180 + c270);
  const double tol = 1e-12 * bias;
  if (std::abs(in_phase) <= tol && std::abs(quadrature) <= tol)
    throw DegenerateAmplitude("four_bucket_phase: zero modulation amplitude");
  return wrap_to_2pi(std::atan2(quadrature, in_phase));
}

/// N uniformly spaced demodulation phases over [0, 2pi).
inline std::vector<double> uniform_psi_grid(int n) {
  if (n < 1) throw InvalidArgument("uniform_psi_grid: n must be >= 1");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = kTwoPi * i / n;
  return g;
}

inline void validate_psi_grid(std::span<const double> psi_grid) {
  const std::size_t n = psi_grid.size();
  if (n < 3) throw InvalidArgument("psi grid needs at least 3 samples");
  for (std::size_t i = 0; i < n; ++i) {
    const double expected = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
    if (std::abs(psi_grid[i] - expected) > 1e-9)
      throw InvalidArgument("psi grid must be uniform over [0, 2pi)");
  }
}

/// Single-bin DFT estimate of phase, amplitude and bias.
///
/// With samples s_n = B + A cos(psi_n - phi) on a uniform grid, the one-cycle
/// bin X_1 = (A N / 2) e^{-i phi}; phase = -arg(X_1), amplitude = 2|X_1|/N and
/// bias = |X_0|/N. `bin` selects a different signal bin.
inline RecoveredPixel dft_phase_estimate(std::span<const double> samples,
                                         std::span<const double> psi_grid, int bin = 1) {
  if (samples.size() != psi_grid.size())
    throw ShapeMismatch("dft_phase_estimate: samples and psi grid differ in length");
  validate_psi_grid(psi_grid);
  const std::size_t n = samples.size();
  if (bin < 1 || static_cast<std::size_t>(bin) >= n)
    throw InvalidArgument("dft_phase_estimate: bin out of range");

  double dc = 0.0, re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ang = bin * psi_grid[i];
    dc += samples[i];
    re += samples[i] * std::cos(ang);
    im -= samples[i] * std::sin(ang);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  RecoveredPixel px;
  px.amplitude = 2.0 * std::hypot(re, im) * inv_n;
  px.bias = std::abs(dc) * inv_n;
  px.phase = px.amplitude > 0.0 ? wrap_to_2pi(-std::atan2(im, re)) : 0.0;
  return px;
}

struct NoisySample {
  double value = 0.0;
  bool clamped = false; // the shot-noise rate was negative and clamped to zero
};

/// C~ = C + eta_shot + N(mu, sigma), with the shot rate lambda = max(C, 0).
inline NoisySample apply_noise(double value, const NoiseParams &noise, Rng &rng) {
  NoisySample out;
  double lambda = value;
  if (lambda < 0.0) {
    lambda = 0.0;
    out.clamped = true;
  }
  double shot = 0.0;
  if (noise.shot != ShotNoise::None && lambda > 0.0) {
    std::poisson_distribution<long long> poisson(lambda);
    if (noise.shot == ShotNoise::Poisson) {
      shot = static_cast<double>(poisson(rng));
      if (noise.recenter) shot -= lambda;
    } else {
      const auto a = poisson(rng);
      const auto b = poisson(rng);
      shot = static_cast<double>(a - b);
    }
  }
  double gauss = noise.mu;
  if (noise.sigma > 0.0) {
    std::normal_distribution<double> normal(noise.mu, noise.sigma);
    gauss = normal(rng);
  }
  out.value = value + shot + gauss;
  return out;
}

/// Clamp to [0, full_scale] and round half-to-even onto 2^bits uniform codes.
inline std::uint32_t quantize(double value, const AdcConfig &adc) {
  adc.validate();
  if (!(value > 0.0)) return 0; // also maps NaN to 0
  if (value >= adc.full_scale) return adc.max_code();
  const double scaled = value / adc.full_scale * static_cast<double>(adc.max_code());
  return static_cast<std::uint32_t>(std::nearbyint(scaled)); // FE_TONEAREST: ties to even
}

inline double dequantize(std::uint32_t code, const AdcConfig &adc) {
  return static_cast<double>(code) * adc.lsb();
}

/// z = phi c / (4 pi omega)
inline double depth_from_phase(double phi_unwrapped, double omega) {
  if (!(omega > 0.0)) throw InvalidArgument("depth_from_phase: omega must be > 0");
  return phi_unwrapped * kSpeedOfLight / (2.0 * kTwoPi * omega);
}

inline double phase_from_depth(double depth_m, double omega) {
  if (!(omega > 0.0)) throw InvalidArgument("phase_from_depth: omega must be > 0");
  return depth_m * 2.0 * kTwoPi * omega / kSpeedOfLight;
}

/// Depth spanned by one phase wrap, c / (2 omega).
inline double wrap_distance(double omega) { return depth_from_phase(kTwoPi, omega); }

} // namespace ghztof
