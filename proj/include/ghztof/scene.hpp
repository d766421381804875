// SPDX-License-Identifier: Apache-2.0
#pragma once

// Depth+intensity scenes -> multi-frequency correlation stacks with ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ghztof/common.hpp"
#include "ghztof/correlation.hpp"
#include "ghztof/parallel.hpp"
#include "ghztof/tofb.hpp"

namespace ghztof {

/// Depth in millimeters and single-channel reflectance in [0, 1].
struct RgbdFrame {
  Grid<double> depth_mm;
  Grid<double> intensity;

  int height() const { return depth_mm.height; }
  int width() const { return depth_mm.width; }

  void validate() const {
    require_same_shape(depth_mm, intensity, "RgbdFrame");
    for (double z : depth_mm.data)
      if (!(z >= 0.0) || !std::isfinite(z)) throw InvalidArgument("RgbdFrame: depth must be finite and >= 0");
    for (double i : intensity.data)
      if (!(i >= 0.0 && i <= 1.0)) throw InvalidArgument("RgbdFrame: intensity must lie in [0, 1]");
  }
};

struct FrequencyPlan {
  std::vector<double> frequencies;
  std::vector<double> psi_grid; // demodulation phases
  std::vector<bool> doubled;    // channel produced by optical frequency doubling

  /// 7.15 GHz fundamental plus the doubled (7.15 GHz + 10 MHz) x 2 channel.
  static FrequencyPlan standard(int psi_count = 16) {
    return {{7.15e9, 2.0 * (7.15e9 + 10e6)}, uniform_psi_grid(psi_count), {false, true}};
  }

  void validate() const {
    if (frequencies.empty()) throw InvalidArgument("FrequencyPlan: no frequencies");
    for (double f : frequencies)
      if (!(f > 0.0)) throw InvalidArgument("FrequencyPlan: frequencies must be > 0");
    if (!doubled.empty() && doubled.size() != frequencies.size())
      throw InvalidArgument("FrequencyPlan: doubling flags do not match frequencies");
    validate_psi_grid(psi_grid);
  }

  double lowest() const { return *std::min_element(frequencies.begin(), frequencies.end()); }
};

/// Demodulation phases from RF-driver phases. A doubled channel carries twice
/// the driver phase, so a 0..pi driver sweep covers 0..2pi of demodulation phase.
inline std::vector<double> demodulation_from_driver(const std::vector<double> &driver, bool doubled) {
  std::vector<double> out(driver);
  if (doubled)
    for (double &p : out) p *= 2.0;
  return out;
}

/// How a stack's samples depend on the travel phase.
enum class PhaseConvention {
  Lag,  // C = B + A cos(psi - phi)
  Lead, // C = B + A cos(Phi + psi), the rendering formula
};

struct StackProvenance {
  double gain = 1.0;
  double exposure = 1.0;
  bool corrupted = false;
  NoiseParams noise = NoiseParams::none();
  std::optional<AdcConfig> adc; // set when samples hold ADC codes
  std::uint64_t seed = 0;
};

struct CorrelationStack {
  Grid<double> samples; // H x W x N
  std::vector<double> psi_grid;
  double frequency = 0.0;
  PhaseConvention convention = PhaseConvention::Lead;
  StackProvenance provenance;

  void validate() const {
    if (static_cast<std::size_t>(samples.channels) != psi_grid.size())
      throw ShapeMismatch("CorrelationStack: channel count differs from psi grid");
    if (!(frequency > 0.0)) throw InvalidArgument("CorrelationStack: frequency must be > 0");
  }
};

struct RecoveredMaps {
  Grid<double> phase; // wrapped, [0, 2pi)
  Grid<double> amplitude;
  Grid<double> bias;
  Mask valid;
  double frequency = 0.0;

  int height() const { return phase.height; }
  int width() const { return phase.width; }
};

struct GroundTruth {
  Grid<double> phase; // unwrapped
  Grid<int> wraps;
};

inline Grid<double> phase_from_depth_map(const RgbdFrame &frame, double omega) {
  Grid<double> phi(frame.height(), frame.width());
  for (std::size_t i = 0; i < phi.data.size(); ++i)
    phi.data[i] = phase_from_depth(frame.depth_mm.data[i] * 1e-3, omega);
  return phi;
}

/// One correlation image C = G I (0.5 + cos(Phi + psi) / pi) T.
inline Grid<double> render_correlation(const RgbdFrame &frame, double omega, double psi, double gain,
                                       double exposure) {
  if (!(gain > 0.0) || !(exposure > 0.0)) throw InvalidArgument("render_correlation: gain and exposure must be > 0");
  const Grid<double> phi = phase_from_depth_map(frame, omega);
  Grid<double> c(frame.height(), frame.width());
  for (std::size_t i = 0; i < c.data.size(); ++i)
    c.data[i] = gain * frame.intensity.data[i] * (0.5 + std::cos(phi.data[i] + psi) / kPi) * exposure;
  return c;
}

inline CorrelationStack render_stack(const RgbdFrame &frame, double omega, const std::vector<double> &psi_grid,
                                     double gain, double exposure) {
  validate_psi_grid(psi_grid);
  CorrelationStack s;
  s.samples = Grid<double>(frame.height(), frame.width(), static_cast<int>(psi_grid.size()));
  s.psi_grid = psi_grid;
  s.frequency = omega;
  s.convention = PhaseConvention::Lead;
  s.provenance.gain = gain;
  s.provenance.exposure = exposure;
  for (std::size_t k = 0; k < psi_grid.size(); ++k) {
    const Grid<double> img = render_correlation(frame, omega, psi_grid[k], gain, exposure);
    for (std::size_t p = 0; p < img.data.size(); ++p) s.samples.data[p * psi_grid.size() + k] = img.data[p];
  }
  return s;
}

/// ADC full scale: largest expected noisy value plus 5 sigma of headroom.
/// The verbatim Poisson term doubles the expected value of each sample.
inline double default_full_scale(const CorrelationStack &stack, const NoiseParams &noise) {
  double peak = 0.0;
  for (double v : stack.samples.data) peak = std::max(peak, v);
  double expected = peak;
  double spread = noise.sigma;
  if (noise.shot == ShotNoise::Poisson && !noise.recenter) expected += peak;
  if (noise.shot != ShotNoise::None) {
    const double shot_var = noise.shot == ShotNoise::Skellam ? 2.0 * peak : peak;
    spread = std::sqrt(noise.sigma * noise.sigma + shot_var);
  }
  const double fs = expected + std::max(noise.mu, 0.0) + 5.0 * spread;
  return fs > 0.0 ? fs : 1.0;
}

/// Independent per-sample noise followed by quantization. Row y draws from the
/// stream derive_seed(seed, y), so output is independent of `threads`.
inline CorrelationStack corrupt(const CorrelationStack &stack, const NoiseParams &noise, const AdcConfig &adc,
                                std::uint64_t seed, int threads = 1) {
  stack.validate();
  noise.validate();
  adc.validate();
  if (stack.provenance.corrupted) throw InvalidArgument("corrupt: stack is already corrupted");
  CorrelationStack out = stack;
  const int w = stack.samples.width, n = stack.samples.channels;
  parallel_rows(stack.samples.height, threads, [&](int y) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(y)));
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < n; ++c) {
        const NoisySample s = apply_noise(stack.samples(y, x, c), noise, rng);
        out.samples(y, x, c) = static_cast<double>(quantize(s.value, adc));
      }
  });
  out.provenance.corrupted = true;
  out.provenance.noise = noise;
  out.provenance.adc = adc;
  out.provenance.seed = seed;
  return out;
}

/// Per-pixel DFT recovery. Pixels with vanishing modulation are masked invalid.
inline RecoveredMaps recover_maps(const CorrelationStack &stack) {
  stack.validate();
  validate_psi_grid(stack.psi_grid);
  const int h = stack.samples.height, w = stack.samples.width, n = stack.samples.channels;
  RecoveredMaps m;
  m.phase = Grid<double>(h, w);
  m.amplitude = Grid<double>(h, w);
  m.bias = Grid<double>(h, w);
  m.valid = Mask(h, w);
  m.frequency = stack.frequency;
  const double scale = stack.provenance.adc ? stack.provenance.adc->lsb() : 1.0;
  std::vector<double> px(static_cast<std::size_t>(n));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < n; ++c) px[static_cast<std::size_t>(c)] = stack.samples(y, x, c) * scale;
      const RecoveredPixel r = dft_phase_estimate(px, stack.psi_grid);
      const bool ok = r.amplitude > 0.0 && r.amplitude > 1e-12 * r.bias;
      m.phase(y, x) = stack.convention == PhaseConvention::Lead ? wrap_to_2pi(-r.phase) : r.phase;
      m.amplitude(y, x) = r.amplitude;
      m.bias(y, x) = r.bias;
      m.valid(y, x) = ok ? 1 : 0;
    }
  return m;
}

inline GroundTruth ground_truth_wraps(const RgbdFrame &frame, double omega_ref) {
  GroundTruth gt;
  gt.phase = phase_from_depth_map(frame, omega_ref);
  gt.wraps = Grid<int>(frame.height(), frame.width());
  for (std::size_t i = 0; i < gt.phase.data.size(); ++i)
    gt.wraps.data[i] = static_cast<int>(std::floor(gt.phase.data[i] / kTwoPi));
  return gt;
}

// --- procedural scenes ---------------------------------------------------

enum class SceneKind { SlantedPlane, StepBlocks, Sphere, PerlinTexture };

inline SceneKind scene_kind_from_string(const std::string &s) {
  if (s == "slanted_plane") return SceneKind::SlantedPlane;
  if (s == "step_blocks") return SceneKind::StepBlocks;
  if (s == "sphere") return SceneKind::Sphere;
  if (s == "perlin" || s == "perlin_texture") return SceneKind::PerlinTexture;
  throw InvalidArgument("unknown scene kind: " + s);
}

struct SceneParams {
  double base_depth_mm = 300.0;
  double depth_span_mm = 40.0; // plane tilt across the frame, sphere radius, perlin amplitude
  double step_mm = 0.5;        // gage-block height difference
  double albedo = 0.8;
  std::uint64_t seed = 0;
};

namespace detail {

inline double smoothstep(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

/// 2-D gradient noise on an integer lattice with seeded gradients.
class GradientNoise {
public:
  explicit GradientNoise(std::uint64_t seed) : seed_(seed) {}

  double operator()(double x, double y) const {
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    const double tx = x - fx, ty = y - fy;
    const double n00 = dot(ix, iy, tx, ty), n10 = dot(ix + 1, iy, tx - 1.0, ty);
    const double n01 = dot(ix, iy + 1, tx, ty - 1.0), n11 = dot(ix + 1, iy + 1, tx - 1.0, ty - 1.0);
    const double u = smoothstep(tx), v = smoothstep(ty);
    const double a = n00 + u * (n10 - n00), b = n01 + u * (n11 - n01);
    return a + v * (b - a); // roughly [-0.7, 0.7]
  }

  /// Fractal sum of octaves, normalized to about [-1, 1].
  double fbm(double x, double y, int octaves) const {
    double sum = 0.0, amp = 1.0, norm = 0.0, f = 1.0;
    for (int o = 0; o < octaves; ++o) {
      sum += amp * (*this)(x * f, y * f);
      norm += amp;
      amp *= 0.5;
      f *= 2.0;
    }
    return std::clamp(sum / norm / 0.7, -1.0, 1.0);
  }

private:
  double dot(std::int64_t ix, std::int64_t iy, double dx, double dy) const {
    const std::uint64_t hsh = derive_seed(seed_, static_cast<std::uint64_t>(ix), static_cast<std::uint64_t>(iy));
    const double ang = static_cast<double>(hsh >> 11) * (kTwoPi / 9007199254740992.0);
    return std::cos(ang) * dx + std::sin(ang) * dy;
  }
  std::uint64_t seed_;
};

} // namespace detail

inline RgbdFrame synth_scene(SceneKind kind, int height, int width, const SceneParams &p = {}) {
  if (height < 8 || width < 8) throw InvalidArgument("synth_scene: dimensions must be at least 8x8");
  RgbdFrame f{Grid<double>(height, width), Grid<double>(height, width, 1, p.albedo)};
  switch (kind) {
  case SceneKind::SlantedPlane: {
    const double gx = 0.7 * p.depth_span_mm / (width - 1), gy = 0.3 * p.depth_span_mm / (height - 1);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) f.depth_mm(y, x) = p.base_depth_mm + gx * x + gy * y;
    break;
  }
  case SceneKind::StepBlocks: {
    // Left block at the base depth; right block raised towards the camera by step_mm.
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) f.depth_mm(y, x) = x < width / 2 ? p.base_depth_mm : p.base_depth_mm - p.step_mm;
    break;
  }
  case SceneKind::Sphere: {
    const double cy = 0.5 * (height - 1), cx = 0.5 * (width - 1);
    const double r_px = 0.35 * std::min(height, width);
    const double back = p.base_depth_mm + p.depth_span_mm;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double d2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (r_px * r_px);
        f.depth_mm(y, x) = d2 < 1.0 ? back - p.depth_span_mm * std::sqrt(1.0 - d2) : back;
      }
    break;
  }
  case SceneKind::PerlinTexture: {
    const detail::GradientNoise depth_noise(derive_seed(p.seed, 1)), tex_noise(derive_seed(p.seed, 2));
    const double scale = 4.0 / std::max(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double d = depth_noise.fbm(x * scale, y * scale, 3);
        f.depth_mm(y, x) = std::max(0.0, p.base_depth_mm + 0.5 * p.depth_span_mm * (1.0 + d));
        const double t = tex_noise.fbm(x * scale * 2.0, y * scale * 2.0, 4);
        f.intensity(y, x) = std::clamp(p.albedo * (0.55 + 0.45 * t), 0.0, 1.0);
      }
    break;
  }
  }
  return f;
}

/// Randomized composite scene for training data: a tilted background plane
/// plus boxes and spheres, with textured reflectance. Depths stay inside
/// [min_depth_mm, max_depth_mm].
inline RgbdFrame random_scene(int height, int width, std::uint64_t seed, double min_depth_mm, double max_depth_mm) {
  if (height < 8 || width < 8) throw InvalidArgument("random_scene: dimensions must be at least 8x8");
  if (!(max_depth_mm > min_depth_mm) || min_depth_mm < 0.0) throw InvalidArgument("random_scene: bad depth range");
  Rng rng(derive_seed(seed, 0x5ce7e));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double span = max_depth_mm - min_depth_mm;
  RgbdFrame f{Grid<double>(height, width), Grid<double>(height, width)};

  const double back = min_depth_mm + span * (0.55 + 0.4 * u01(rng));
  const double gx = (u01(rng) - 0.5) * 0.5 * span / width, gy = (u01(rng) - 0.5) * 0.5 * span / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) f.depth_mm(y, x) = back + gx * (x - width / 2.0) + gy * (y - height / 2.0);

  const int objects = 1 + static_cast<int>(u01(rng) * 4.0);
  for (int o = 0; o < objects; ++o) {
    const double cx = u01(rng) * width, cy = u01(rng) * height;
    const double r = (0.12 + 0.25 * u01(rng)) * std::min(height, width);
    const double z0 = min_depth_mm + span * (0.05 + 0.6 * u01(rng));
    const bool sphere = u01(rng) < 0.5;
    const double tx = (u01(rng) - 0.5) * 0.3 * span / width, ty = (u01(rng) - 0.5) * 0.3 * span / height;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double dx = (x - cx) / r, dy = (y - cy) / r;
        double z;
        if (sphere) {
          const double d2 = dx * dx + dy * dy;
          if (d2 >= 1.0) continue;
          z = z0 + 0.15 * span * (1.0 - std::sqrt(1.0 - d2));
        } else {
          if (std::abs(dx) >= 1.0 || std::abs(dy) >= 0.7) continue;
          z = z0 + tx * (x - cx) + ty * (y - cy);
        }
        f.depth_mm(y, x) = std::min(f.depth_mm(y, x), z);
      }
  }
  const detail::GradientNoise tex(derive_seed(seed, 0x7e8));
  const double scale = 6.0 / std::max(height, width);
  const double base_albedo = 0.4 + 0.6 * u01(rng);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      f.depth_mm(y, x) = std::clamp(f.depth_mm(y, x), min_depth_mm, max_depth_mm);
      f.intensity(y, x) = std::clamp(base_albedo * (0.6 + 0.4 * tex.fbm(x * scale, y * scale, 3)), 0.02, 1.0);
    }
  return f;
}

// --- RGB-D container I/O -------------------------------------------------

inline void write_rgbd(const std::filesystem::path &path, const RgbdFrame &frame) {
  frame.validate();
  tofb::Raster r;
  r.dtype = tofb::DType::F64;
  r.semantics = tofb::Semantics::Rgbd;
  r.grid = Grid<double>(frame.height(), frame.width(), 2);
  for (std::size_t i = 0; i < frame.depth_mm.data.size(); ++i) {
    r.grid.data[2 * i] = frame.depth_mm.data[i];
    r.grid.data[2 * i + 1] = frame.intensity.data[i];
  }
  tofb::write(path, r);
}

/// Reads an external RGB-D frame (depth in mm, intensity expected in [0, 1]).
inline RgbdFrame ingest_rgbd(const std::filesystem::path &path) {
  const tofb::Raster r = tofb::read(path);
  if (r.semantics != tofb::Semantics::Rgbd) throw FormatError("ingest_rgbd: container is not an RGB-D frame");
  if (r.grid.channels != 2) throw ShapeMismatch("ingest_rgbd: expected 2 channels (depth, intensity)");
  RgbdFrame f{Grid<double>(r.grid.height, r.grid.width), Grid<double>(r.grid.height, r.grid.width)};
  for (std::size_t i = 0; i < f.depth_mm.data.size(); ++i) {
    f.depth_mm.data[i] = r.grid.data[2 * i];
    f.intensity.data[i] = r.grid.data[2 * i + 1];
  }
  try {
    f.validate();
  } catch (const InvalidArgument &e) {
    throw FormatError(std::string("ingest_rgbd: ") + e.what());
  }
  return f;
}

} // namespace ghztof
