// SPDX-License-Identifier: Apache-2.0
#pragma once

// Evaluation: wrap-count delta metrics, depth errors, plane fits, the
// precision-vs-frequency sweep, and report/image writers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ghztof/common.hpp"
#include "ghztof/correlation.hpp"

namespace ghztof {

struct DeltaReport {
  double pct_delta0 = 0.0;
  double pct_delta_le1 = 0.0;
  double pct_delta_le2 = 0.0;
  double pct_delta_ge3 = 0.0;
  double pct_delta_ge10 = 0.0;
  std::size_t valid_pixel_count = 0;
};

inline std::size_t mask_count(const Mask &mask) {
  std::size_t n = 0;
  for (auto m : mask.data)
    if (m) ++n;
  return n;
}

/// Percentages of masked pixels by |pred - gt|.
inline DeltaReport delta_metrics(const Grid<int> &pred, const Grid<int> &gt, const Mask &mask) {
  require_same_shape(pred, gt, "delta_metrics");
  require_same_shape(pred, mask, "delta_metrics");
  std::array<std::size_t, 5> counts{}; // 0, <=1, <=2, >=3, >=10
  DeltaReport r;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    if (!mask.data[i]) continue;
    ++r.valid_pixel_count;
    const long long d = std::llabs(static_cast<long long>(pred.data[i]) - gt.data[i]);
    if (d == 0) ++counts[0];
    if (d <= 1) ++counts[1];
    if (d <= 2) ++counts[2];
    if (d >= 3) ++counts[3];
    if (d >= 10) ++counts[4];
  }
  if (r.valid_pixel_count == 0) throw InvalidArgument("delta_metrics: empty mask");
  const double s = 100.0 / static_cast<double>(r.valid_pixel_count);
  r.pct_delta0 = counts[0] * s;
  r.pct_delta_le1 = counts[1] * s;
  r.pct_delta_le2 = counts[2] * s;
  r.pct_delta_ge3 = counts[3] * s;
  r.pct_delta_ge10 = counts[4] * s;
  return r;
}

struct DepthErrors {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t pixels = 0;
};

/// RMSE and MAE over masked pixels, in the units of the inputs.
inline DepthErrors depth_errors(const Grid<double> &pred, const Grid<double> &gt, const Mask &mask) {
  require_same_shape(pred, gt, "depth_errors");
  require_same_shape(pred, mask, "depth_errors");
  DepthErrors e;
  double sq = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    if (!mask.data[i]) continue;
    const double d = pred.data[i] - gt.data[i];
    sq += d * d;
    ab += std::abs(d);
    ++e.pixels;
  }
  if (e.pixels == 0) throw InvalidArgument("depth_errors: empty mask");
  e.rmse = std::sqrt(sq / static_cast<double>(e.pixels));
  e.mae = ab / static_cast<double>(e.pixels);
  return e;
}

struct PlaneFit {
  double a = 0.0; // z = a x + b y + c
  double b = 0.0;
  double c = 0.0;
  double r2 = 0.0;
};

/// Least-squares plane z = a x + b y + c over masked pixels (x = column, y = row).
inline PlaneFit plane_fit_r2(const Grid<double> &depth, const Mask &mask) {
  require_same_shape(depth, mask, "plane_fit_r2");
  // Centered normal equations for numerical stability.
  double n = 0.0, mx = 0.0, my = 0.0, mz = 0.0;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x)
      if (mask(y, x)) {
        n += 1.0;
        mx += x;
        my += y;
        mz += depth(y, x);
      }
  if (n < 3.0) throw InvalidArgument("plane_fit_r2: need at least 3 masked pixels");
  mx /= n;
  my /= n;
  mz /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0, sxz = 0.0, syz = 0.0, szz = 0.0;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x)
      if (mask(y, x)) {
        const double dx = x - mx, dy = y - my, dz = depth(y, x) - mz;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
        szz += dz * dz;
      }
  const double det = sxx * syy - sxy * sxy;
  if (!(szz > 0.0)) throw InvalidArgument("plane_fit_r2: depth has zero variance");
  if (!(std::abs(det) > 0.0)) throw InvalidArgument("plane_fit_r2: pixel coordinates are collinear");
  PlaneFit f;
  f.a = (sxz * syy - syz * sxy) / det;
  f.b = (syz * sxx - sxz * sxy) / det;
  f.c = mz - f.a * mx - f.b * my;
  double ss_res = 0.0;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x)
      if (mask(y, x)) {
        const double r = depth(y, x) - (f.a * x + f.b * y + f.c);
        ss_res += r * r;
      }
  f.r2 = 1.0 - ss_res / szz;
  return f;
}

// --- precision sweep ---------------------------------------------------------

struct PrecisionSweepConfig {
  double depth_m = 0.01;
  int samples = 1000;
  double amplitude = 2e6; // alpha: buckets are bias + alpha/2 cos(psi - phi)
  double bias = 2e6;
  NoiseParams noise = skellam();
  int adc_bits = 14; // 0 disables quantization

  static NoiseParams skellam() {
    NoiseParams n;
    n.shot = ShotNoise::Skellam;
    return n;
  }
  std::uint64_t seed = 0;

  void validate() const {
    if (!(depth_m >= 0.0)) throw InvalidArgument("PrecisionSweepConfig: depth must be >= 0");
    if (samples < 2) throw InvalidArgument("PrecisionSweepConfig: need at least 2 samples");
    if (!(amplitude > 0.0) || !(bias >= 0.0)) throw InvalidArgument("PrecisionSweepConfig: bad signal levels");
    if (adc_bits != 0) AdcConfig{adc_bits, 1.0}.validate();
    noise.validate();
  }

  /// Fixed across frequencies: signal peak plus 5 sigma of the combined noise.
  AdcConfig adc() const {
    const double peak = bias + 0.5 * amplitude;
    double shot_var = 0.0;
    if (noise.shot == ShotNoise::Poisson) shot_var = peak;
    if (noise.shot == ShotNoise::Skellam) shot_var = 2.0 * peak;
    const double shift = noise.shot == ShotNoise::Poisson && !noise.recenter ? peak : 0.0;
    return {adc_bits, peak + shift + std::max(noise.mu, 0.0) + 5.0 * std::sqrt(noise.sigma * noise.sigma + shot_var)};
  }
};

struct PrecisionPoint {
  double omega = 0.0;
  double mean_m = 0.0;
  double std_m = 0.0;
  std::size_t degenerate = 0; // samples whose buckets carried no modulation
};

/// Gaussian sigma giving a four-bucket depth std of `depth_std_m` at `omega`,
/// accounting for the shot-noise variance at the mean bucket level. An
/// un-recentered Poisson term doubles the signal as well as adding variance.
inline double calibrate_sigma(double depth_std_m, double omega, const PrecisionSweepConfig &cfg) {
  const double phase_std = phase_from_depth(depth_std_m, omega);
  const bool doubled = cfg.noise.shot == ShotNoise::Poisson && !cfg.noise.recenter;
  const double a = 0.5 * cfg.amplitude * (doubled ? 2.0 : 1.0);
  double shot = 0.0; // variance of (C0 - C180) from shot noise, averaged over phase
  if (cfg.noise.shot == ShotNoise::Poisson) shot = 2.0 * cfg.bias;
  if (cfg.noise.shot == ShotNoise::Skellam) shot = 4.0 * cfg.bias;
  // var(phase) = var(C0 - C180) / (2a)^2 with var(C0 - C180) = 2 sigma^2 + shot
  const double total = (2.0 * a * phase_std) * (2.0 * a * phase_std);
  if (total <= shot) throw InvalidArgument("calibrate_sigma: shot noise alone exceeds the target");
  return std::sqrt((total - shot) / 2.0);
}

/// Four-bucket acquisitions of a point at fixed depth, one RNG stream per
/// frequency. Each estimate is unwrapped to the wrap nearest the true phase.
inline std::vector<PrecisionPoint> precision_sweep(std::span<const double> omegas, const PrecisionSweepConfig &cfg) {
  cfg.validate();
  const AdcConfig adc = cfg.adc();
  std::vector<PrecisionPoint> out;
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    const double omega = omegas[k];
    if (!(omega > 0.0)) throw InvalidArgument("precision_sweep: frequencies must be > 0");
    const double phi = phase_from_depth(cfg.depth_m, omega);
    const SignalParams sig{cfg.amplitude, cfg.bias, phi, omega};
    Rng rng(derive_seed(cfg.seed, k));
    PrecisionPoint p;
    p.omega = omega;
    std::vector<double> depths;
    depths.reserve(static_cast<std::size_t>(cfg.samples));
    for (int s = 0; s < cfg.samples; ++s) {
      std::array<double, 4> c{};
      for (int b = 0; b < 4; ++b) {
        double v = apply_noise(homodyne_correlation(sig, b * kPi / 2.0, cfg.bias), cfg.noise, rng).value;
        if (cfg.adc_bits != 0) v = dequantize(quantize(v, adc), adc);
        c[static_cast<std::size_t>(b)] = v;
      }
      double est;
      try {
        est = four_bucket_phase(c[0], c[1], c[2], c[3]);
      } catch (const DegenerateAmplitude &) {
        ++p.degenerate;
        continue;
      }
      est += kTwoPi * std::nearbyint((phi - est) / kTwoPi);
      depths.push_back(depth_from_phase(est, omega));
    }
    if (depths.size() >= 2) {
      double m = 0.0;
      for (double d : depths) m += d;
      m /= static_cast<double>(depths.size());
      double v = 0.0;
      for (double d : depths) v += (d - m) * (d - m);
      p.mean_m = m;
      p.std_m = std::sqrt(v / static_cast<double>(depths.size() - 1));
    }
    out.push_back(p);
  }
  return out;
}

// --- report writers ----------------------------------------------------------

struct ReportRow {
  std::string method;
  DeltaReport delta;
  DepthErrors errors; // millimeters
};

inline std::string report_csv(std::span<const ReportRow> rows) {
  std::ostringstream os;
  os << "method,delta0,delta_le1,delta_le2,delta_ge3,delta_ge10,rmse_mm,mae_mm,pixels\n";
  char buf[256];
  for (const auto &r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.6f,%.6f,%zu\n", r.method.c_str(), r.delta.pct_delta0,
                  r.delta.pct_delta_le1, r.delta.pct_delta_le2, r.delta.pct_delta_ge3, r.delta.pct_delta_ge10,
                  r.errors.rmse, r.errors.mae, r.delta.valid_pixel_count);
    os << buf;
  }
  return os.str();
}

inline std::string precision_csv(std::span<const PrecisionPoint> pts) {
  std::ostringstream os;
  os << "omega_hz,mean_m,std_m\n";
  char buf[128];
  for (const auto &p : pts) {
    std::snprintf(buf, sizeof buf, "%.6e,%.9e,%.9e\n", p.omega, p.mean_m, p.std_m);
    os << buf;
  }
  return os.str();
}

inline void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

/// 8-bit PGM of `values` linearly mapped from [lo, hi]; unmasked pixels are 0.
inline void write_pgm(const std::filesystem::path &path, const Grid<double> &values, const Mask &mask, double lo,
                      double hi) {
  require_same_shape(values, mask, "write_pgm");
  std::string s = "P5\n" + std::to_string(values.width) + " " + std::to_string(values.height) + "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < values.data.size(); ++i) {
    double t = mask.data[i] ? (values.data[i] - lo) / span : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    s.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
  }
  write_text(path, s);
}

/// Color-coded wrap error map: delta 0 green, 1 yellow, 2 orange, >=3 red,
/// >=10 magenta, unmasked black.
inline void write_delta_ppm(const std::filesystem::path &path, const Grid<int> &pred, const Grid<int> &gt,
                            const Mask &mask) {
  require_same_shape(pred, gt, "write_delta_ppm");
  require_same_shape(pred, mask, "write_delta_ppm");
  std::string s = "P6\n" + std::to_string(pred.width) + " " + std::to_string(pred.height) + "\n255\n";
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    std::array<unsigned char, 3> rgb{0, 0, 0};
    if (mask.data[i]) {
      const long long d = std::llabs(static_cast<long long>(pred.data[i]) - gt.data[i]);
      if (d == 0) rgb = {0, 200, 0};
      else if (d == 1) rgb = {230, 220, 0};
      else if (d == 2) rgb = {255, 140, 0};
      else if (d < 10) rgb = {220, 0, 0};
      else rgb = {220, 0, 220};
    }
    for (auto c : rgb) s.push_back(static_cast<char>(c));
  }
  write_text(path, s);
}

} // namespace ghztof
