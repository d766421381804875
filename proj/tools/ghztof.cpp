// SPDX-License-Identifier: Apache-2.0
// ghztof: simulate, recover, unwrap, train, eval, sweep-precision.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ghztof/ghztof.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ghztof;

namespace {

/// JSON config files: {"<subcommand>": {"<flag>": value, ...}}.
class ConfigJson : public CLI::Config {
public:
  std::string to_config(const CLI::App *, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream &input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception &e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> out;
    walk(j, {}, out);
    return out;
  }

private:
  static std::string scalar(const json &v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

  static void walk(const json &j, std::vector<std::string> parents, std::vector<CLI::ConfigItem> &out) {
    for (const auto &[key, v] : j.items()) {
      if (v.is_object()) {
        auto p = parents;
        p.push_back(key);
        walk(v, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array())
        for (const auto &e : v) item.inputs.push_back(scalar(e));
      else
        item.inputs.push_back(scalar(v));
      out.push_back(std::move(item));
    }
  }
};

/// Resolved flags of `sub` (given or defaulted), keyed by long name. `--out` and
/// `--threads` are omitted: neither changes the results.
json resolved_config(const CLI::App *sub) {
  json flags = json::object();
  for (const CLI::Option *opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "out" || name == "threads") continue;
    if (opt->count() > 0) {
      const auto &res = opt->results();
      if (opt->get_type_size() == 0 || opt->get_expected_max() == 0) flags[name] = true;
      else if (res.size() == 1) flags[name] = res.front();
      else flags[name] = res;
    } else if (opt->get_expected_max() == 0) {
      flags[name] = false;
    } else {
      flags[name] = opt->get_default_str();
    }
  }
  return {{sub->get_name(), flags}};
}

void prepare_out(const fs::path &out, const CLI::App *sub) {
  fs::create_directories(out);
  tofb::write_json(out / "config.json", resolved_config(sub));
}

std::vector<double> parse_list(const std::string &s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw InvalidArgument("");
    } catch (const std::exception &) {
      throw InvalidArgument("not a number: '" + tok + "'");
    }
  }
  if (v.empty()) throw InvalidArgument("empty list");
  return v;
}

CandidateRange parse_range(const std::string &s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw InvalidArgument("range must look like MIN:MAX");
  CandidateRange r;
  try {
    r.min_wrap = std::stoi(s.substr(0, colon));
    r.max_wrap = std::stoi(s.substr(colon + 1));
  } catch (const std::exception &) {
    throw InvalidArgument("range must look like MIN:MAX");
  }
  r.validate();
  return r;
}

std::vector<fs::path> numbered(const fs::path &dir, const std::string &stem) {
  std::vector<fs::path> out;
  for (int i = 0;; ++i) {
    const fs::path p = dir / (stem + "_" + std::to_string(i) + ".tofb");
    if (!fs::exists(p)) break;
    out.push_back(p);
  }
  if (out.empty()) throw Error("no " + stem + "_*.tofb files in " + dir.string());
  return out;
}

// --- simulate ------------------------------------------------------------------

struct SimulateOpts {
  std::string scene = "slanted_plane";
  std::string freqs = "7.15e9,14.32e9";
  int psi_count = 16;
  double gain = 20.0, exposure = 1000.0, sigma = 1200.0, mu = 0.0;
  int adc_bits = 14;
  std::string shot = "poisson";
  bool no_noise = false;
  std::uint64_t seed = 0;
  int height = 128, width = 128;
  double base_mm = 300.0, span_mm = 40.0, step_mm = 0.5, albedo = 0.8;
  int threads = default_thread_count();
  std::string out;
};

void add_simulate(CLI::App &app, SimulateOpts &o) {
  app.add_option("--scene", o.scene, "slanted_plane|step_blocks|sphere|perlin|ingest:PATH");
  app.add_option("--freqs", o.freqs, "comma-separated modulation frequencies (Hz)");
  app.add_option("--psi-count", o.psi_count, "demodulation phases per frequency")->check(CLI::Range(3, 4096));
  app.add_option("--gain", o.gain, "sensor gain G");
  app.add_option("--exposure", o.exposure, "exposure T (ms)");
  app.add_option("--sigma", o.sigma, "read noise sigma");
  app.add_option("--mu", o.mu, "read noise mean");
  app.add_option("--adc-bits", o.adc_bits, "ADC resolution")->check(CLI::Range(1, 16));
  app.add_option("--shot", o.shot, "shot noise model")->check(CLI::IsMember({"none", "poisson", "skellam"}));
  app.add_flag("--no-noise", o.no_noise, "skip noise and quantization");
  app.add_option("--seed", o.seed, "RNG seed");
  app.add_option("--height", o.height, "rows")->check(CLI::Range(8, 8192));
  app.add_option("--width", o.width, "columns")->check(CLI::Range(8, 8192));
  app.add_option("--base-depth-mm", o.base_mm, "scene base depth");
  app.add_option("--span-mm", o.span_mm, "plane tilt, sphere radius or texture amplitude");
  app.add_option("--step-mm", o.step_mm, "gage-block step height");
  app.add_option("--albedo", o.albedo, "reflectance")->check(CLI::Range(0.0, 1.0));
  app.add_option("--threads", o.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "output directory")->required();
}

RgbdFrame make_scene(const SimulateOpts &o) {
  if (o.scene.rfind("ingest:", 0) == 0) return ingest_rgbd(o.scene.substr(7));
  SceneParams p;
  p.base_depth_mm = o.base_mm;
  p.depth_span_mm = o.span_mm;
  p.step_mm = o.step_mm;
  p.albedo = o.albedo;
  p.seed = o.seed;
  return synth_scene(scene_kind_from_string(o.scene), o.height, o.width, p);
}

int run_simulate(const SimulateOpts &o, const CLI::App *sub) {
  SimulationConfig cfg;
  cfg.plan.frequencies = parse_list(o.freqs);
  cfg.plan.psi_grid = uniform_psi_grid(o.psi_count);
  cfg.plan.doubled.clear();
  cfg.gain = o.gain;
  cfg.exposure = o.exposure;
  cfg.noise.sigma = o.sigma;
  cfg.noise.mu = o.mu;
  cfg.noise.shot = shot_noise_from_string(o.shot);
  cfg.adc_bits = o.adc_bits;
  cfg.noiseless = o.no_noise;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  const RgbdFrame frame = make_scene(o);
  const auto stacks = simulate_stacks(frame, cfg);

  const fs::path out = o.out;
  prepare_out(out, sub);
  for (std::size_t i = 0; i < stacks.size(); ++i) write_stack(out / ("stack_" + std::to_string(i) + ".tofb"), stacks[i]);
  write_rgbd(out / "scene.tofb", frame);
  const GroundTruth gt = ground_truth_wraps(frame, cfg.plan.frequencies.front());
  write_depth_mm(out / "gt_depth.tofb", frame.depth_mm);
  write_int_raster(out / "gt_wraps.tofb", gt.wraps, tofb::Semantics::Wraps);
  tofb::write_json(out / "simulation.json", cfg.to_json());
  return 0;
}

// --- recover -------------------------------------------------------------------

struct RecoverOpts {
  std::string in, out;
};

int run_recover(const RecoverOpts &o, const CLI::App *sub) {
  std::vector<RecoveredMaps> maps;
  for (const auto &p : numbered(o.in, "stack")) maps.push_back(recover_maps(read_stack(p)));
  const fs::path out = o.out;
  prepare_out(out, sub);
  for (std::size_t i = 0; i < maps.size(); ++i) write_maps(out / ("maps_" + std::to_string(i) + ".tofb"), maps[i]);
  return 0;
}

// --- unwrap --------------------------------------------------------------------

struct UnwrapOpts {
  std::string in, out, method = "crt", range = "0:96", checkpoint;
  int kde_window = 9;
  double kde_sigma_spatial = 2.0, kde_sigma_hyp = 0.5, max_depth_m = 2.0;
};

int run_unwrap(const UnwrapOpts &o, const CLI::App *sub) {
  std::vector<RecoveredMaps> maps;
  for (const auto &p : numbered(o.in, "maps")) maps.push_back(read_maps(p));
  const CandidateRange range = parse_range(o.range);
  auto need_pair = [&] {
    if (maps.size() < 2) throw Error("method '" + o.method + "' needs two frequencies");
    return FrequencyPair{maps[0].frequency, maps[1].frequency};
  };
  UnwrapResult r;
  if (o.method == "crt") r = crt_unwrap_map(maps[0], maps[1 % maps.size()], need_pair(), range, CrtSearch::Reduced);
  else if (o.method == "crt-exhaustive")
    r = crt_unwrap_map(maps[0], maps[1 % maps.size()], need_pair(), range, CrtSearch::Exhaustive);
  else if (o.method == "kde") {
    KdeParams k;
    k.window = o.kde_window;
    k.sigma_spatial = o.kde_sigma_spatial;
    k.sigma_hyp = o.kde_sigma_hyp;
    r = kde_unwrap_map(maps[0], maps[1 % maps.size()], need_pair(), range, k);
  } else if (o.method == "phasor") {
    const FrequencyPair p = need_pair();
    r = phasor_unwrap(maps[0], maps[1], p.omega2 - p.omega1, o.max_depth_m);
  } else if (o.method == "sequential") r = sequential_unwrap_map(maps[0]);
  else if (o.method == "neural") {
    if (o.checkpoint.empty()) throw InvalidArgument("method 'neural' needs --checkpoint");
    const Checkpoint ck = read_checkpoint(o.checkpoint);
    r = predict_wrap_map(ck.params, maps, ck.metadata.value("octaves", 1));
  }
  const fs::path out = o.out;
  prepare_out(out, sub);
  write_unwrap_result(out, r);
  return 0;
}

// --- train ---------------------------------------------------------------------

struct TrainOpts {
  int scenes = 500, height = 64, width = 64, classes = 16, octaves = 1, net_width = 16;
  double min_mm = 20.0, max_mm = 320.0;
  std::string freqs = "7.15e9,14.32e9";
  int psi_count = 16, adc_bits = 14;
  double gain = 20.0, exposure = 1000.0, sigma = 1200.0;
  std::string shot = "poisson";
  std::string optimizer = "sgd";
  double lr = 0.05, lr_decay = 0.995, w_l1 = 0.1, gamma = 10.0, val = 0.2;
  int epochs = 20, batch = 4;
  std::uint64_t seed = 0;
  std::string out;
};

int run_train(const TrainOpts &o, const CLI::App *sub) {
  DatasetConfig d;
  d.count = o.scenes;
  d.height = o.height;
  d.width = o.width;
  d.min_depth_mm = o.min_mm;
  d.max_depth_mm = o.max_mm;
  d.sim.plan.frequencies = parse_list(o.freqs);
  d.sim.plan.psi_grid = uniform_psi_grid(o.psi_count);
  d.sim.plan.doubled.clear();
  d.sim.gain = o.gain;
  d.sim.exposure = o.exposure;
  d.sim.noise.sigma = o.sigma;
  d.sim.noise.shot = shot_noise_from_string(o.shot);
  d.sim.adc_bits = o.adc_bits;
  d.seed = o.seed;

  TrainConfig cfg;
  cfg.optimizer = optimizer_from_string(o.optimizer);
  cfg.lr0 = o.lr;
  cfg.lr_decay = o.lr_decay;
  cfg.epochs = o.epochs;
  cfg.batch = o.batch;
  cfg.w_l1 = o.w_l1;
  cfg.gamma = o.gamma;
  cfg.validation_fraction = o.val;
  cfg.omega_min = d.sim.plan.frequencies.front();
  cfg.seed = derive_seed(o.seed, 3);
  cfg.validate();

  const auto items = procedural_dataset(d);
  std::vector<TrainSample> samples;
  for (const auto &it : items) samples.push_back(make_sample(it.maps, it.truth.wraps, o.octaves, o.classes));
  const auto arch = nn::Architecture::standard(encoded_channels(static_cast<int>(d.sim.plan.frequencies.size()), o.octaves),
                                               o.classes, o.net_width);
  const TrainResult res = train(samples, arch, cfg);

  const fs::path out = o.out;
  prepare_out(out, sub);
  write_checkpoint(out / "checkpoint.tofb", res.params,
                   {{"octaves", o.octaves}, {"classes", o.classes}, {"frequencies", d.sim.plan.frequencies}});
  write_text(out / "train_log.csv", training_log_csv(res.log));
  if (res.diverged) {
    std::cerr << "training diverged; checkpoint holds the last finite parameters\n";
    return 1;
  }
  return 0;
}

// --- eval ----------------------------------------------------------------------

struct EvalOpts {
  std::string pred, gt, out, name = "method";
};

int run_eval(const EvalOpts &o, const CLI::App *sub) {
  const UnwrapResult pred = read_unwrap_result(o.pred);
  const fs::path gdir = o.gt;
  const Grid<int> gt_wraps = read_int_raster<int>(gdir / "gt_wraps.tofb", tofb::Semantics::Wraps);
  const Grid<double> gt_mm = read_depth_mm(gdir / "gt_depth.tofb");
  require_same_shape(pred.wraps, gt_wraps, "eval");
  const DeltaReport delta = delta_metrics(pred.wraps, gt_wraps, pred.valid);
  const DepthErrors err = depth_errors(depth_m_to_mm(pred.depth_m), gt_mm, pred.valid);

  const fs::path out = o.out;
  prepare_out(out, sub);
  const std::vector<ReportRow> rows{{o.name, delta, err}};
  write_text(out / "report.csv", report_csv(rows));
  write_delta_ppm(out / "delta.ppm", pred.wraps, gt_wraps, pred.valid);
  double lo = 1e300, hi = -1e300;
  for (double v : gt_mm.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  write_pgm(out / "depth.pgm", depth_m_to_mm(pred.depth_m), pred.valid, lo, hi);
  std::printf("%s delta0=%.4f delta_ge10=%.4f rmse_mm=%.6f pixels=%zu\n", o.name.c_str(), delta.pct_delta0,
              delta.pct_delta_ge10, err.rmse, delta.valid_pixel_count);
  return 0;
}

// --- sweep-precision -----------------------------------------------------------

struct SweepOpts {
  std::string freqs = "1e8,3.16227766e8,1e9,3.16227766e9,1e10";
  int samples = 1000, adc_bits = 14;
  double depth_mm = 10.0, amplitude = 2e6, bias = 2e6, sigma = -1.0, target_std_mm = 1.0;
  std::string shot = "skellam";
  std::uint64_t seed = 0;
  std::string out;
};

int run_sweep(const SweepOpts &o, const CLI::App *sub) {
  const std::vector<double> om = parse_list(o.freqs);
  PrecisionSweepConfig cfg;
  cfg.depth_m = o.depth_mm * 1e-3;
  cfg.samples = o.samples;
  cfg.amplitude = o.amplitude;
  cfg.bias = o.bias;
  cfg.adc_bits = o.adc_bits;
  cfg.noise.shot = shot_noise_from_string(o.shot);
  cfg.seed = o.seed;
  // Negative sigma: calibrate it so the lowest frequency sees target_std_mm.
  cfg.noise.sigma =
      o.sigma >= 0.0 ? o.sigma : calibrate_sigma(o.target_std_mm * 1e-3, *std::min_element(om.begin(), om.end()), cfg);
  const auto pts = precision_sweep(om, cfg);
  const fs::path out = o.out;
  prepare_out(out, sub);
  write_text(out / "precision.csv", precision_csv(pts));
  tofb::write_json(out / "sweep.json", {{"sigma", cfg.noise.sigma}, {"adc_full_scale", cfg.adc().full_scale}});
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"GHz time-of-flight simulation and phase unwrapping"};
  app.config_formatter(std::make_shared<ConfigJson>());
  app.set_config("--config", "", "JSON file of flags: {\"<command>\": {\"<flag>\": value}}");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SimulateOpts sim;
  auto *c_sim = app.add_subcommand("simulate", "render correlation stacks and ground truth");
  add_simulate(*c_sim, sim);

  RecoverOpts rec;
  auto *c_rec = app.add_subcommand("recover", "per-pixel phase, amplitude and bias");
  c_rec->add_option("--in", rec.in, "simulate output directory")->required();
  c_rec->add_option("--out", rec.out, "output directory")->required();

  UnwrapOpts un;
  auto *c_un = app.add_subcommand("unwrap", "wrap counts and depth");
  c_un->add_option("--in", un.in, "recover output directory")->required();
  c_un->add_option("--method", un.method, "unwrapping method")
      ->check(CLI::IsMember({"crt", "crt-exhaustive", "kde", "phasor", "sequential", "neural"}));
  c_un->add_option("--range", un.range, "wrap candidates MIN:MAX at the first frequency");
  c_un->add_option("--checkpoint", un.checkpoint, "network checkpoint for --method neural");
  c_un->add_option("--kde-window", un.kde_window, "KDE window (odd)");
  c_un->add_option("--kde-sigma-spatial", un.kde_sigma_spatial, "KDE spatial sigma (px)");
  c_un->add_option("--kde-sigma-hyp", un.kde_sigma_hyp, "KDE hypothesis sigma (rad)");
  c_un->add_option("--max-depth-m", un.max_depth_m, "phasor operating range");
  c_un->add_option("--out", un.out, "output directory")->required();

  TrainOpts tr;
  auto *c_tr = app.add_subcommand("train", "train the wrap-count network on procedural scenes");
  c_tr->add_option("--scenes", tr.scenes, "number of scenes")->check(CLI::PositiveNumber);
  c_tr->add_option("--height", tr.height, "rows")->check(CLI::Range(8, 4096));
  c_tr->add_option("--width", tr.width, "columns")->check(CLI::Range(8, 4096));
  c_tr->add_option("--min-depth-mm", tr.min_mm, "nearest scene depth");
  c_tr->add_option("--max-depth-mm", tr.max_mm, "farthest scene depth");
  c_tr->add_option("--freqs", tr.freqs, "comma-separated modulation frequencies (Hz)");
  c_tr->add_option("--psi-count", tr.psi_count, "demodulation phases")->check(CLI::Range(3, 4096));
  c_tr->add_option("--gain", tr.gain, "sensor gain G");
  c_tr->add_option("--exposure", tr.exposure, "exposure T (ms)");
  c_tr->add_option("--sigma", tr.sigma, "read noise sigma");
  c_tr->add_option("--shot", tr.shot, "shot noise model")->check(CLI::IsMember({"none", "poisson", "skellam"}));
  c_tr->add_option("--adc-bits", tr.adc_bits, "ADC resolution")->check(CLI::Range(1, 16));
  c_tr->add_option("--classes", tr.classes, "wrap classes")->check(CLI::Range(2, 4096));
  c_tr->add_option("--octaves", tr.octaves, "Fourier encoding octaves")->check(CLI::Range(0, 16));
  c_tr->add_option("--net-width", tr.net_width, "base channel width")->check(CLI::PositiveNumber);
  c_tr->add_option("--optimizer", tr.optimizer, "sgd|adam")->check(CLI::IsMember({"sgd", "adam"}));
  c_tr->add_option("--lr", tr.lr, "initial learning rate");
  c_tr->add_option("--lr-decay", tr.lr_decay, "per-epoch learning-rate factor");
  c_tr->add_option("--epochs", tr.epochs, "epochs");
  c_tr->add_option("--batch", tr.batch, "batch size");
  c_tr->add_option("--w-l1", tr.w_l1, "weight of the soft-argmax L1 term");
  c_tr->add_option("--gamma", tr.gamma, "soft-argmax sharpness");
  c_tr->add_option("--val", tr.val, "validation fraction");
  c_tr->add_option("--seed", tr.seed, "RNG seed");
  c_tr->add_option("--out", tr.out, "output directory")->required();

  EvalOpts ev;
  auto *c_ev = app.add_subcommand("eval", "delta metrics, depth errors and error maps");
  c_ev->add_option("--pred", ev.pred, "unwrap output directory")->required();
  c_ev->add_option("--gt", ev.gt, "simulate output directory")->required();
  c_ev->add_option("--name", ev.name, "method label in the report");
  c_ev->add_option("--out", ev.out, "output directory")->required();

  SweepOpts sw;
  auto *c_sw = app.add_subcommand("sweep-precision", "depth std against modulation frequency");
  c_sw->add_option("--freqs", sw.freqs, "comma-separated modulation frequencies (Hz)");
  c_sw->add_option("--samples", sw.samples, "acquisitions per frequency")->check(CLI::Range(2, 100000000));
  c_sw->add_option("--depth-mm", sw.depth_mm, "target depth");
  c_sw->add_option("--amplitude", sw.amplitude, "modulation amplitude");
  c_sw->add_option("--bias", sw.bias, "bucket bias");
  c_sw->add_option("--sigma", sw.sigma, "read noise sigma; negative calibrates to --target-std-mm");
  c_sw->add_option("--target-std-mm", sw.target_std_mm, "depth std at the lowest frequency when calibrating");
  c_sw->add_option("--adc-bits", sw.adc_bits, "ADC resolution, 0 disables quantization")->check(CLI::Range(0, 16));
  c_sw->add_option("--shot", sw.shot, "shot noise model")->check(CLI::IsMember({"none", "poisson", "skellam"}));
  c_sw->add_option("--seed", sw.seed, "RNG seed");
  c_sw->add_option("--out", sw.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (c_sim->parsed()) return run_simulate(sim, c_sim);
    if (c_rec->parsed()) return run_recover(rec, c_rec);
    if (c_un->parsed()) return run_unwrap(un, c_un);
    if (c_tr->parsed()) return run_train(tr, c_tr);
    if (c_ev->parsed()) return run_eval(ev, c_ev);
    if (c_sw->parsed()) return run_sweep(sw, c_sw);
  } catch (const InvalidArgument &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
