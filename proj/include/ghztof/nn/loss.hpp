// SPDX-License-Identifier: Apache-2.0
#pragma once

// Soft ordinal classification head: temperature soft-argmax over wrap classes
// and the mixed cross-entropy + L1 depth loss.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ghztof/common.hpp"
#include "ghztof/nn/tensor.hpp"

namespace ghztof::nn {

/// softmax(scale * logits) computed in log-sum-exp form.
inline void softmax(std::span<const double> logits, double scale, std::span<double> out) {
  double mx = -INFINITY;
  for (double l : logits) mx = std::max(mx, scale * l);
  double sum = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a) {
    out[a] = std::exp(scale * logits[a] - mx);
    sum += out[a];
  }
  for (double &v : out) v /= sum;
}

/// Differentiable argmax: sum_a a * softmax(gamma * logits)_a, in [0, C - 1].
inline double soft_argmax(std::span<const double> logits, double gamma) {
  if (!(gamma > 0.0)) throw InvalidArgument("soft_argmax: gamma must be > 0");
  std::vector<double> p(logits.size());
  softmax(logits, gamma, p);
  double e = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) e += static_cast<double>(a) * p[a];
  return e;
}

inline int hard_argmax(std::span<const double> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

/// Per-pixel soft-argmax of a C x H x W logit tensor.
inline Grid<double> soft_argmax_map(const Tensor &logits, double gamma) {
  Grid<double> out(logits.height, logits.width);
  std::vector<double> l(static_cast<std::size_t>(logits.channels));
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      for (int c = 0; c < logits.channels; ++c) l[static_cast<std::size_t>(c)] = logits(c, y, x);
      out(y, x) = soft_argmax(l, gamma);
    }
  return out;
}

struct LossConfig {
  double w_l1 = 0.1;
  double gamma = 10.0;
  double mm_per_wrap = 1.0; // depth of one wrap at the lowest frequency, c / (2 omega_min), in mm
};

struct LossResult {
  double loss = 0.0; // ce + w_l1 * l1
  double ce = 0.0;
  double l1 = 0.0;
  std::size_t pixels = 0;
  Tensor grad; // dloss / dlogits
};

/// Mean over valid pixels of CE(softmax(logits), onehot(label)) + w_l1 |Z^ - Z|.
/// Z^ is the soft-argmax wrap expectation converted to depth (mm); the shared
/// fine phase cancels, so |Z^ - Z| = |n^ - n| * mm_per_wrap.
inline LossResult wrap_loss(const Tensor &logits, const Grid<int> &labels, const Mask &mask, const LossConfig &cfg) {
  if (labels.height != logits.height || labels.width != logits.width || !mask.same_shape(labels))
    throw ShapeMismatch("wrap_loss: logits, labels and mask must share dimensions");
  if (!(cfg.gamma > 0.0)) throw InvalidArgument("wrap_loss: gamma must be > 0");
  const int classes = logits.channels;
  LossResult r;
  r.grad = Tensor(classes, logits.height, logits.width);
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    if (mask.data[i]) ++r.pixels;
  if (r.pixels == 0) throw InvalidArgument("wrap_loss: empty mask");
  const double inv_n = 1.0 / static_cast<double>(r.pixels);

  std::vector<double> l(static_cast<std::size_t>(classes)), p(l.size()), q(l.size());
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      if (!mask(y, x)) continue;
      const int label = labels(y, x);
      if (label < 0 || label >= classes) throw InvalidArgument("wrap_loss: label outside class range");
      for (int c = 0; c < classes; ++c) l[static_cast<std::size_t>(c)] = logits(c, y, x);

      softmax(l, 1.0, p);
      r.ce -= std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));

      softmax(l, cfg.gamma, q);
      double expect = 0.0;
      for (int c = 0; c < classes; ++c) expect += c * q[static_cast<std::size_t>(c)];
      const double diff = expect - label;
      r.l1 += std::abs(diff) * cfg.mm_per_wrap;
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);

      for (int c = 0; c < classes; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        const double dce = p[cc] - (c == label ? 1.0 : 0.0);
        const double dexp = cfg.gamma * q[cc] * (c - expect); // d expect / d logit_c
        r.grad(c, y, x) = (dce + cfg.w_l1 * cfg.mm_per_wrap * sgn * dexp) * inv_n;
      }
    }
  r.ce *= inv_n;
  r.l1 *= inv_n;
  r.loss = r.ce + cfg.w_l1 * r.l1;
  return r;
}

} // namespace ghztof::nn
