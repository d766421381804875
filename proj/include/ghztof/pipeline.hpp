// SPDX-License-Identifier: Apache-2.0
#pragma once

// Simulation driver and on-disk formats for stacks, recovered maps and
// per-pixel results.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghztof/common.hpp"
#include "ghztof/correlation.hpp"
#include "ghztof/scene.hpp"
#include "ghztof/tofb.hpp"
#include "ghztof/unwrap_classical.hpp"

namespace ghztof {

inline std::string to_string(ShotNoise s) {
  switch (s) {
  case ShotNoise::None: return "none";
  case ShotNoise::Poisson: return "poisson";
  case ShotNoise::Skellam: return "skellam";
  }
  return "none";
}

inline ShotNoise shot_noise_from_string(const std::string &s) {
  if (s == "none") return ShotNoise::None;
  if (s == "poisson") return ShotNoise::Poisson;
  if (s == "skellam") return ShotNoise::Skellam;
  throw InvalidArgument("unknown shot noise model: " + s);
}

struct SimulationConfig {
  FrequencyPlan plan = FrequencyPlan::standard();
  double gain = 20.0;
  double exposure = 1000.0; // ms
  NoiseParams noise = paper_noise();
  int adc_bits = 14;
  bool noiseless = false; // skip noise and quantization entirely
  std::uint64_t seed = 0;
  int threads = 1;

  static NoiseParams paper_noise() {
    NoiseParams n;
    n.sigma = 1200.0;
    return n;
  }

  void validate() const {
    plan.validate();
    if (!(gain > 0.0) || !(exposure > 0.0)) throw InvalidArgument("SimulationConfig: gain and exposure must be > 0");
    if (!noiseless) {
      noise.validate();
      AdcConfig{adc_bits, 1.0}.validate();
    }
    if (threads < 1) throw InvalidArgument("SimulationConfig: threads must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"frequencies", plan.frequencies},
            {"psi_grid", plan.psi_grid},
            {"gain", gain},
            {"exposure", exposure},
            {"sigma", noise.sigma},
            {"mu", noise.mu},
            {"shot", to_string(noise.shot)},
            {"recenter", noise.recenter},
            {"adc_bits", adc_bits},
            {"noiseless", noiseless},
            {"seed", seed}};
  }
};

/// One stack per planned frequency; stack f draws noise from derive_seed(seed, f + 1).
inline std::vector<CorrelationStack> simulate_stacks(const RgbdFrame &frame, const SimulationConfig &cfg) {
  cfg.validate();
  frame.validate();
  std::vector<CorrelationStack> out;
  for (std::size_t f = 0; f < cfg.plan.frequencies.size(); ++f) {
    CorrelationStack s = render_stack(frame, cfg.plan.frequencies[f], cfg.plan.psi_grid, cfg.gain, cfg.exposure);
    if (!cfg.noiseless) {
      const AdcConfig adc{cfg.adc_bits, default_full_scale(s, cfg.noise)};
      s = corrupt(s, cfg.noise, adc, derive_seed(cfg.seed, f + 1), cfg.threads);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<RecoveredMaps> recover_all(const std::vector<CorrelationStack> &stacks) {
  std::vector<RecoveredMaps> out;
  for (const auto &s : stacks) out.push_back(recover_maps(s));
  return out;
}

// --- correlation stacks ------------------------------------------------------

/// Raster plus sidecar JSON. ADC-coded stacks are stored as u16 codes.
inline void write_stack(const std::filesystem::path &path, const CorrelationStack &s) {
  s.validate();
  tofb::Raster r;
  r.semantics = tofb::Semantics::Correlation;
  r.dtype = s.provenance.adc && s.provenance.adc->bits <= 16 ? tofb::DType::U16 : tofb::DType::F64;
  r.grid = s.samples;
  tofb::write(path, r);
  nlohmann::json j{{"frequency", s.frequency},
                   {"psi_grid", s.psi_grid},
                   {"convention", s.convention == PhaseConvention::Lead ? "lead" : "lag"},
                   {"gain", s.provenance.gain},
                   {"exposure", s.provenance.exposure},
                   {"corrupted", s.provenance.corrupted},
                   {"seed", s.provenance.seed}};
  if (s.provenance.adc) j["adc"] = {{"bits", s.provenance.adc->bits}, {"full_scale", s.provenance.adc->full_scale}};
  tofb::write_json(tofb::sidecar_path(path), j);
}

inline CorrelationStack read_stack(const std::filesystem::path &path) {
  const tofb::Raster r = tofb::read(path);
  if (r.semantics != tofb::Semantics::Correlation) throw FormatError(path.string() + ": not a correlation stack");
  const nlohmann::json j = tofb::read_json(tofb::sidecar_path(path));
  CorrelationStack s;
  try {
    s.samples = r.grid;
    s.frequency = j.at("frequency").get<double>();
    s.psi_grid = j.at("psi_grid").get<std::vector<double>>();
    s.convention = j.at("convention").get<std::string>() == "lag" ? PhaseConvention::Lag : PhaseConvention::Lead;
    s.provenance.gain = j.at("gain").get<double>();
    s.provenance.exposure = j.at("exposure").get<double>();
    s.provenance.corrupted = j.at("corrupted").get<bool>();
    s.provenance.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("adc"))
      s.provenance.adc = AdcConfig{j["adc"].at("bits").get<int>(), j["adc"].at("full_scale").get<double>()};
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(path.string() + ": bad stack sidecar: " + e.what());
  }
  try {
    s.validate();
  } catch (const InvalidArgument &e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return s;
}

// --- recovered maps ------------------------------------------------------------

/// Channels: phase, amplitude, bias, valid.
inline void write_maps(const std::filesystem::path &path, const RecoveredMaps &m) {
  tofb::Raster r;
  r.semantics = tofb::Semantics::Recovered;
  r.dtype = tofb::DType::F64;
  r.grid = Grid<double>(m.height(), m.width(), 4);
  for (std::size_t i = 0; i < m.phase.data.size(); ++i) {
    r.grid.data[4 * i] = m.phase.data[i];
    r.grid.data[4 * i + 1] = m.amplitude.data[i];
    r.grid.data[4 * i + 2] = m.bias.data[i];
    r.grid.data[4 * i + 3] = m.valid.data[i];
  }
  tofb::write(path, r);
  tofb::write_json(tofb::sidecar_path(path), {{"frequency", m.frequency}});
}

inline RecoveredMaps read_maps(const std::filesystem::path &path) {
  const tofb::Raster r = tofb::read(path);
  if (r.semantics != tofb::Semantics::Recovered || r.grid.channels != 4)
    throw FormatError(path.string() + ": not a recovered-maps raster");
  const nlohmann::json j = tofb::read_json(tofb::sidecar_path(path));
  const int h = r.grid.height, w = r.grid.width;
  RecoveredMaps m{Grid<double>(h, w), Grid<double>(h, w), Grid<double>(h, w), Mask(h, w), 0.0};
  for (std::size_t i = 0; i < m.phase.data.size(); ++i) {
    m.phase.data[i] = r.grid.data[4 * i];
    m.amplitude.data[i] = r.grid.data[4 * i + 1];
    m.bias.data[i] = r.grid.data[4 * i + 2];
    m.valid.data[i] = r.grid.data[4 * i + 3] != 0.0 ? 1 : 0;
  }
  if (!j.contains("frequency") || !j["frequency"].is_number()) throw FormatError(path.string() + ": missing frequency");
  m.frequency = j["frequency"].get<double>();
  return m;
}

// --- per-pixel results ---------------------------------------------------------

inline void write_depth_mm(const std::filesystem::path &path, const Grid<double> &depth_mm) {
  tofb::write(path, {tofb::DType::F64, tofb::Semantics::DepthMm, depth_mm});
}

inline Grid<double> read_depth_mm(const std::filesystem::path &path) {
  const tofb::Raster r = tofb::read(path);
  if (r.semantics != tofb::Semantics::DepthMm || r.grid.channels != 1)
    throw FormatError(path.string() + ": not a depth raster");
  return r.grid;
}

template <typename T>
void write_int_raster(const std::filesystem::path &path, const Grid<T> &g, tofb::Semantics sem) {
  Grid<double> d(g.height, g.width);
  for (std::size_t i = 0; i < g.data.size(); ++i) d.data[i] = static_cast<double>(g.data[i]);
  tofb::write(path, {tofb::DType::F64, sem, d});
}

template <typename T>
Grid<T> read_int_raster(const std::filesystem::path &path, tofb::Semantics sem) {
  const tofb::Raster r = tofb::read(path);
  if (r.semantics != sem || r.grid.channels != 1) throw FormatError(path.string() + ": unexpected raster semantics");
  Grid<T> g(r.grid.height, r.grid.width);
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    const double v = r.grid.data[i];
    if (v != std::nearbyint(v)) throw FormatError(path.string() + ": non-integral value");
    g.data[i] = static_cast<T>(v);
  }
  return g;
}

inline Grid<double> depth_m_to_mm(const Grid<double> &m) {
  Grid<double> mm = m;
  for (double &v : mm.data) v *= 1e3;
  return mm;
}

/// Writes wraps.tofb, depth.tofb (mm) and valid.tofb into `dir`.
inline void write_unwrap_result(const std::filesystem::path &dir, const UnwrapResult &r) {
  write_int_raster(dir / "wraps.tofb", r.wraps, tofb::Semantics::Wraps);
  write_depth_mm(dir / "depth.tofb", depth_m_to_mm(r.depth_m));
  write_int_raster(dir / "valid.tofb", r.valid, tofb::Semantics::Mask);
}

inline UnwrapResult read_unwrap_result(const std::filesystem::path &dir) {
  UnwrapResult r;
  r.wraps = read_int_raster<int>(dir / "wraps.tofb", tofb::Semantics::Wraps);
  r.depth_m = read_depth_mm(dir / "depth.tofb");
  for (double &v : r.depth_m.data) v *= 1e-3;
  r.valid = read_int_raster<std::uint8_t>(dir / "valid.tofb", tofb::Semantics::Mask);
  require_same_shape(r.wraps, r.depth_m, "read_unwrap_result");
  require_same_shape(r.wraps, r.valid, "read_unwrap_result");
  return r;
}

// --- procedural datasets --------------------------------------------------------

struct DatasetConfig {
  int count = 500;
  int height = 64;
  int width = 64;
  double min_depth_mm = 20.0;
  double max_depth_mm = 320.0;
  SimulationConfig sim;
  std::uint64_t seed = 0;

  void validate() const {
    if (count < 1) throw InvalidArgument("DatasetConfig: count must be >= 1");
    if (!(min_depth_mm >= 0.0) || !(max_depth_mm > min_depth_mm)) throw InvalidArgument("DatasetConfig: bad depth range");
    sim.validate();
  }
};

struct DatasetItem {
  RgbdFrame frame;
  std::vector<RecoveredMaps> maps;
  GroundTruth truth; // at the first planned frequency
};

/// Scene i is random_scene(derive_seed(seed, 1, i)); its noise uses derive_seed(seed, 2, i).
inline std::vector<DatasetItem> procedural_dataset(const DatasetConfig &cfg) {
  cfg.validate();
  std::vector<DatasetItem> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    const auto ui = static_cast<std::uint64_t>(i);
    DatasetItem item;
    item.frame = random_scene(cfg.height, cfg.width, derive_seed(cfg.seed, 1, ui), cfg.min_depth_mm, cfg.max_depth_mm);
    SimulationConfig sim = cfg.sim;
    sim.seed = derive_seed(cfg.seed, 2, ui);
    item.maps = recover_all(simulate_stacks(item.frame, sim));
    item.truth = ground_truth_wraps(item.frame, cfg.sim.plan.frequencies.front());
    out.push_back(std::move(item));
  }
  return out;
}

} // namespace ghztof
