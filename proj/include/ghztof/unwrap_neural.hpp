// SPDX-License-Identifier: Apache-2.0
#pragma once

// Neural wrap-count estimation: Fourier feature encoding of wrapped phase,
// a convolutional soft-ordinal classifier, training and inference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghztof/common.hpp"
#include "ghztof/correlation.hpp"
#include "ghztof/nn/loss.hpp"
#include "ghztof/nn/network.hpp"
#include "ghztof/scene.hpp"
#include "ghztof/tofb.hpp"
#include "ghztof/unwrap_classical.hpp"

namespace ghztof {

/// Channels per frequency: cos/sin at 2^0 .. 2^octaves, then normalized amplitude.
inline int encoded_channels(int frequencies, int octaves) { return frequencies * 2 * (octaves + 1) + frequencies; }

/// Fourier feature encoding, one block per frequency:
/// [cos(2^0 phi), sin(2^0 phi), ..., cos(2^EC phi), sin(2^EC phi), A / max(A)].
inline nn::Tensor fourier_encode(std::span<const Grid<double>> phases, std::span<const Grid<double>> amplitudes,
                                 int octaves) {
  if (octaves < 0) throw InvalidArgument("fourier_encode: octaves must be >= 0");
  if (phases.empty() || phases.size() != amplitudes.size())
    throw ShapeMismatch("fourier_encode: need one amplitude map per phase map");
  const int h = phases[0].height, w = phases[0].width;
  const int f = static_cast<int>(phases.size());
  nn::Tensor t(encoded_channels(f, octaves), h, w);
  int c = 0;
  for (int k = 0; k < f; ++k) {
    const Grid<double> &ph = phases[static_cast<std::size_t>(k)];
    const Grid<double> &am = amplitudes[static_cast<std::size_t>(k)];
    if (!ph.same_shape(h, w) || !am.same_shape(h, w)) throw ShapeMismatch("fourier_encode: map dimensions differ");
    for (int o = 0; o <= octaves; ++o) {
      const double m = std::ldexp(1.0, o);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          t(c, y, x) = std::cos(m * ph(y, x));
          t(c + 1, y, x) = std::sin(m * ph(y, x));
        }
      c += 2;
    }
    double amax = 0.0;
    for (double a : am.data) amax = std::max(amax, a);
    const double inv = amax > 0.0 ? 1.0 / amax : 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) t(c, y, x) = am(y, x) * inv;
    ++c;
  }
  return t;
}

inline nn::Tensor fourier_encode(std::span<const RecoveredMaps> maps, int octaves) {
  std::vector<Grid<double>> ph, am;
  for (const auto &m : maps) {
    ph.push_back(m.phase);
    am.push_back(m.amplitude);
  }
  return fourier_encode(ph, am, octaves);
}

struct TrainSample {
  nn::Tensor input;
  Grid<int> labels;
  Mask mask;
};

/// Encodes recovered maps and ground-truth wraps. Pixels that are invalid or
/// whose wrap count falls outside [0, classes) are masked out.
inline TrainSample make_sample(std::span<const RecoveredMaps> maps, const Grid<int> &wraps, int octaves, int classes) {
  TrainSample s;
  s.input = fourier_encode(maps, octaves);
  if (!wraps.same_shape(s.input.height, s.input.width)) throw ShapeMismatch("make_sample: wrap map dimensions differ");
  s.labels = wraps;
  s.mask = Mask(wraps.height, wraps.width, 1, 1);
  for (std::size_t i = 0; i < wraps.data.size(); ++i) {
    bool ok = wraps.data[i] >= 0 && wraps.data[i] < classes;
    for (const auto &m : maps) ok = ok && m.valid.data[i];
    s.mask.data[i] = ok ? 1 : 0;
  }
  return s;
}

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::Sgd;
  double lr0 = 0.05;
  double lr_decay = 0.995; // per epoch
  int epochs = 20;
  int batch = 4;
  double w_l1 = 0.1;
  double gamma = 10.0;
  double momentum = 0.0; // SGD only; 0 = plain SGD
  double beta1 = 0.9;     // Adam only
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double omega_min = 7.15e9;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr0 > 0.0)) throw InvalidArgument("TrainConfig: lr0 must be > 0");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvalidArgument("TrainConfig: lr_decay must be in (0, 1]");
    if (!(gamma > 0.0)) throw InvalidArgument("TrainConfig: gamma must be > 0");
    if (epochs < 1 || batch < 1) throw InvalidArgument("TrainConfig: epochs and batch must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("TrainConfig: momentum must be in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
      throw InvalidArgument("TrainConfig: bad Adam moments");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      throw InvalidArgument("TrainConfig: validation_fraction must be in [0, 1)");
  }

  nn::LossConfig loss() const { return {w_l1, gamma, wrap_distance(omega_min) * 1e3}; }
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double delta0 = 0.0; // % of validation pixels with the exact wrap count
};

struct TrainResult {
  nn::NetworkParams params;
  std::vector<EpochLog> log;
  bool diverged = false;
};

/// Loss and parameter gradients averaged over a batch.
inline double batch_gradient(const nn::NetworkParams &params, std::span<const TrainSample *const> batch,
                             const nn::LossConfig &cfg, nn::NetworkParams &grads) {
  grads = params.zeros_like();
  double loss = 0.0;
  for (const TrainSample *s : batch) {
    const nn::ForwardCache cache = nn::forward_cached(params, s->input);
    const nn::LossResult lr = nn::wrap_loss(cache.logits(), s->labels, s->mask, cfg);
    if (!std::isfinite(lr.loss)) throw Error("non-finite loss");
    nn::backward(params, cache, lr.grad, grads);
    loss += lr.loss;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  grads.for_each([inv](double &g) { g *= inv; });
  return loss * inv;
}

/// Hard-argmax wrap map from logits.
inline Grid<int> argmax_wraps(const nn::Tensor &logits) {
  Grid<int> out(logits.height, logits.width);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      int best = 0;
      for (int c = 1; c < logits.channels; ++c)
        if (logits(c, y, x) > logits(best, y, x)) best = c;
      out(y, x) = best;
    }
  return out;
}

/// Percentage of masked pixels classified exactly.
inline double exact_wrap_percentage(const nn::NetworkParams &params, std::span<const TrainSample> samples) {
  std::size_t hit = 0, total = 0;
  for (const auto &s : samples) {
    const Grid<int> pred = argmax_wraps(nn::forward(params, s.input));
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      if (!s.mask.data[i]) continue;
      ++total;
      if (pred.data[i] == s.labels.data[i]) ++hit;
    }
  }
  return total ? 100.0 * static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

namespace detail {

template <typename Fn>
void zip_params(nn::NetworkParams &p, nn::NetworkParams &a, nn::NetworkParams &b, const nn::NetworkParams &g, Fn &&fn) {
  for (std::size_t l = 0; l < p.convs.size(); ++l) {
    auto &pc = p.convs[l], &ac = a.convs[l], &bc = b.convs[l];
    const auto &gc = g.convs[l];
    for (std::size_t q = 0; q < pc.weights.size(); ++q) fn(pc.weights[q], ac.weights[q], bc.weights[q], gc.weights[q]);
    for (std::size_t q = 0; q < pc.bias.size(); ++q) fn(pc.bias[q], ac.bias[q], bc.bias[q], gc.bias[q]);
  }
}

} // namespace detail

/// One optimizer update. SGD: v <- m v + g, p <- p - lr v. Adam: bias-corrected moments.
inline void step_params(nn::NetworkParams &params, const nn::NetworkParams &grads, nn::NetworkParams &first,
                        nn::NetworkParams &second, const TrainConfig &cfg, double lr, long long step) {
  if (cfg.optimizer == Optimizer::Sgd) {
    detail::zip_params(params, first, second, grads, [&](double &p, double &v, double &, double g) {
      v = cfg.momentum * v + g;
      p -= lr * v;
    });
    return;
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  detail::zip_params(params, first, second, grads, [&](double &p, double &m, double &v, double g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    p -= lr * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
  });
}

inline std::string to_string(Optimizer o) { return o == Optimizer::Sgd ? "sgd" : "adam"; }

inline Optimizer optimizer_from_string(const std::string &s) {
  if (s == "sgd") return Optimizer::Sgd;
  if (s == "adam") return Optimizer::Adam;
  throw InvalidArgument("unknown optimizer: " + s);
}

/// Minibatch gradient descent (SGD or Adam) with an exponentially decaying learning rate. The last
/// validation_fraction of the dataset is held out for the per-epoch delta=0
/// score. Deterministic for a fixed seed. On a non-finite loss training stops
/// and the parameters from the end of the last completed epoch are returned.
inline TrainResult train(std::span<const TrainSample> dataset, const nn::Architecture &arch, const TrainConfig &cfg) {
  cfg.validate();
  arch.validate();
  if (dataset.empty()) throw InvalidArgument("train: empty dataset");
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(dataset.size())));
  if (n_val >= dataset.size()) n_val = dataset.size() - 1;
  const auto train_set = dataset.subspan(0, dataset.size() - n_val);
  const auto val_set = n_val ? dataset.subspan(dataset.size() - n_val) : train_set;

  TrainResult res;
  res.params = nn::init_params(arch, derive_seed(cfg.seed, 0x1417));
  nn::NetworkParams velocity = res.params.zeros_like(); // SGD momentum / Adam first moment
  nn::NetworkParams second = res.params.zeros_like();   // Adam second moment
  nn::NetworkParams grads;
  long long step = 0;
  const nn::LossConfig loss_cfg = cfg.loss();

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr0 * std::pow(cfg.lr_decay, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xe90c, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    const nn::NetworkParams last_good = res.params;
    const nn::NetworkParams last_velocity = velocity, last_second = second;
    const long long last_step = step;
    double epoch_loss = 0.0;
    bool ok = true;
    std::vector<const TrainSample *> batch;
    for (std::size_t start = 0; start < order.size() && ok; start += static_cast<std::size_t>(cfg.batch)) {
      batch.clear();
      for (std::size_t j = start; j < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch)); ++j)
        batch.push_back(&train_set[order[j]]);
      double loss = 0.0;
      try {
        loss = batch_gradient(res.params, batch, loss_cfg, grads);
      } catch (const Error &) {
        ok = false;
        break;
      }
      epoch_loss += loss * static_cast<double>(batch.size());
      ++step;
      step_params(res.params, grads, velocity, second, cfg, lr, step);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!ok || !std::isfinite(epoch_loss) || !res.params.all_finite()) {
      res.params = last_good;
      velocity = last_velocity;
      second = last_second;
      step = last_step;
      res.diverged = true;
      break;
    }
    res.log.push_back({epoch, lr, epoch_loss, exact_wrap_percentage(res.params, val_set)});
  }
  return res;
}

/// Wrap counts from the network; depth combines the predicted wrap count with
/// the measured wrapped phase of the reference (first) channel.
inline UnwrapResult predict_wrap_map(const nn::NetworkParams &params, std::span<const RecoveredMaps> maps, int octaves) {
  if (maps.empty()) throw InvalidArgument("predict_wrap_map: no maps");
  const int h = maps[0].height(), w = maps[0].width();
  for (const auto &m : maps)
    if (!m.phase.same_shape(h, w)) throw ShapeMismatch("predict_wrap_map: map dimensions differ");
  const nn::Tensor enc = fourier_encode(maps, octaves);
  if (enc.channels != params.arch.input_channels) throw ShapeMismatch("predict_wrap_map: encoding does not match network input");

  // Zero-pad to a multiple of the network's downsampling factor, then crop.
  const int m = params.arch.max_downsampling();
  const int hp = (h + m - 1) / m * m, wp = (w + m - 1) / m * m;
  nn::Tensor in = enc;
  if (hp != h || wp != w) {
    in = nn::Tensor(enc.channels, hp, wp);
    for (int c = 0; c < enc.channels; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) in(c, y, x) = enc(c, y, x);
  }
  const Grid<int> wraps = argmax_wraps(nn::forward(params, in));

  UnwrapResult out{Grid<int>(h, w), Grid<double>(h, w), Mask(h, w)};
  const RecoveredMaps &ref = maps[0];
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int n = wraps(y, x);
      bool ok = true;
      for (const auto &mm : maps) ok = ok && mm.valid(y, x);
      out.wraps(y, x) = n;
      out.depth_m(y, x) = depth_from_phase(ref.phase(y, x) + kTwoPi * n, ref.frequency);
      out.valid(y, x) = ok ? 1 : 0;
    }
  return out;
}

// --- checkpoint / log I/O ---------------------------------------------------

/// Checkpoint = "<path>.tofb" (F64 parameter vector, 1 x P x 1) plus the JSON
/// sidecar holding the architecture descriptor and caller metadata.
inline void write_checkpoint(const std::filesystem::path &path, const nn::NetworkParams &params,
                             const nlohmann::json &metadata = nlohmann::json::object()) {
  tofb::Raster r;
  r.dtype = tofb::DType::F64;
  r.semantics = tofb::Semantics::NetworkParams;
  r.grid = Grid<double>(1, static_cast<int>(params.parameter_count()), 1);
  std::size_t q = 0;
  params.for_each([&](double v) { r.grid.data[q++] = v; });
  tofb::write(path, r);
  nlohmann::json side = {{"architecture", nn::to_json(params.arch)}, {"metadata", metadata}};
  tofb::write_json(tofb::sidecar_path(path), side);
}

struct Checkpoint {
  nn::NetworkParams params;
  nlohmann::json metadata;
};

inline Checkpoint read_checkpoint(const std::filesystem::path &path) {
  const tofb::Raster r = tofb::read(path);
  if (r.semantics != tofb::Semantics::NetworkParams) throw FormatError("checkpoint: not a parameter container");
  const nlohmann::json side = tofb::read_json(tofb::sidecar_path(path));
  if (!side.contains("architecture")) throw FormatError("checkpoint: sidecar lacks architecture");
  Checkpoint ck;
  ck.params = nn::init_params(nn::architecture_from_json(side["architecture"]), 0);
  if (ck.params.parameter_count() != r.grid.data.size()) throw FormatError("checkpoint: parameter count mismatch");
  std::size_t q = 0;
  ck.params.for_each([&](double &v) { v = r.grid.data[q++]; });
  ck.metadata = side.value("metadata", nlohmann::json::object());
  return ck;
}

inline std::string training_log_csv(std::span<const EpochLog> log) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,lr,loss,delta0\n";
  for (const auto &e : log) os << e.epoch << ',' << e.lr << ',' << e.loss << ',' << e.delta0 << '\n';
  return os.str();
}

} // namespace ghztof
