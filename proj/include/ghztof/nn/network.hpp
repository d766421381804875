// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fully convolutional wrap-count classifier described by a flat layer list.
// Activation 0 is the input; layer i maps activation i to activation i + 1.
// A Concat layer appends an earlier activation (the skip source) to the
// current one.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghztof/nn/layers.hpp"

namespace ghztof::nn {

enum class LayerKind { Conv, Relu, Upsample2, Concat };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  int in_channels = 0; // conv only
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int skip = -1; // concat only: index of the activation to append

  static LayerSpec conv(int in, int out, int k = 3, int s = 1) { return {LayerKind::Conv, in, out, k, s, -1}; }
  static LayerSpec relu() { return {LayerKind::Relu}; }
  static LayerSpec upsample2() { return {LayerKind::Upsample2}; }
  static LayerSpec concat(int skip) { return {LayerKind::Concat, 0, 0, 3, 1, skip}; }
};

struct Architecture {
  int input_channels = 0;
  int classes = 0;
  std::vector<LayerSpec> layers;

  /// Channel count and downsampling factor of every activation; throws on inconsistency.
  void validate() const {
    if (input_channels < 1) throw InvalidArgument("Architecture: input_channels must be >= 1");
    if (classes < 2) throw InvalidArgument("Architecture: need at least 2 classes");
    std::vector<int> ch{input_channels}, scale{1};
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec &l = layers[i];
      int c = ch.back(), s = scale.back();
      switch (l.kind) {
      case LayerKind::Conv:
        if (l.in_channels != c) throw ShapeMismatch("Architecture: conv input channels disagree at layer " + std::to_string(i));
        if (l.out_channels < 1 || l.kernel < 1 || l.kernel % 2 == 0 || (l.stride != 1 && l.stride != 2))
          throw InvalidArgument("Architecture: bad conv parameters at layer " + std::to_string(i));
        c = l.out_channels;
        s *= l.stride;
        break;
      case LayerKind::Relu: break;
      case LayerKind::Upsample2:
        if (s % 2 != 0) throw InvalidArgument("Architecture: upsampling above input resolution");
        s /= 2;
        break;
      case LayerKind::Concat:
        if (l.skip < 0 || static_cast<std::size_t>(l.skip) > i)
          throw InvalidArgument("Architecture: concat must reference an earlier activation");
        if (scale[static_cast<std::size_t>(l.skip)] != s) throw ShapeMismatch("Architecture: concat resolution mismatch");
        c += ch[static_cast<std::size_t>(l.skip)];
        break;
      }
      ch.push_back(c);
      scale.push_back(s);
    }
    if (ch.back() != classes) throw ShapeMismatch("Architecture: output channels differ from class count");
    if (scale.back() != 1) throw ShapeMismatch("Architecture: output is not at input resolution");
  }

  /// Largest downsampling factor; input height and width must be multiples of it.
  int max_downsampling() const {
    int s = 1, m = 1;
    for (const LayerSpec &l : layers) {
      if (l.kind == LayerKind::Conv) s *= l.stride;
      if (l.kind == LayerKind::Upsample2) s /= 2;
      m = std::max(m, s);
    }
    return m;
  }

  /// Desk-scale unwrapping net: five 3x3 convolutions (widths 16-32-32-16-C),
  /// one stride-2 / upsample pair, and a full-resolution skip into the head.
  static Architecture standard(int input_channels, int classes, int width = 16) {
    const int w1 = width, w2 = 2 * width;
    return {input_channels,
            classes,
            {LayerSpec::conv(input_channels, w1), LayerSpec::relu(), // act 2: full-res features
             LayerSpec::conv(w1, w2, 3, 2), LayerSpec::relu(),
             LayerSpec::conv(w2, w2), LayerSpec::relu(),
             LayerSpec::upsample2(),
             LayerSpec::conv(w2, w1), LayerSpec::relu(),
             LayerSpec::concat(2),
             LayerSpec::conv(2 * w1, classes)}};
  }

  /// Two-convolution network used for gradient checks.
  static Architecture miniature(int input_channels, int classes, int hidden = 6) {
    return {input_channels, classes,
            {LayerSpec::conv(input_channels, hidden), LayerSpec::relu(), LayerSpec::conv(hidden, classes)}};
  }
};

struct NetworkParams {
  Architecture arch;
  std::vector<ConvParams> convs; // one per Conv layer, in order

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto &c : convs) n += c.size();
    return n;
  }

  /// Zeroed parameter blocks with this network's shapes.
  NetworkParams zeros_like() const {
    NetworkParams z{arch, {}};
    for (const auto &c : convs) z.convs.emplace_back(c.in_channels, c.out_channels, c.kernel, c.stride);
    return z;
  }

  bool all_finite() const {
    for (const auto &c : convs) {
      for (double v : c.weights)
        if (!std::isfinite(v)) return false;
      for (double v : c.bias)
        if (!std::isfinite(v)) return false;
    }
    return true;
  }

  /// Visits every scalar parameter in a fixed order.
  template <typename Fn>
  void for_each(Fn &&fn) {
    for (auto &c : convs) {
      for (double &v : c.weights) fn(v);
      for (double &v : c.bias) fn(v);
    }
  }
  template <typename Fn>
  void for_each(Fn &&fn) const {
    for (const auto &c : convs) {
      for (double v : c.weights) fn(v);
      for (double v : c.bias) fn(v);
    }
  }
};

/// He-normal weights, zero biases.
inline NetworkParams init_params(const Architecture &arch, std::uint64_t seed) {
  arch.validate();
  NetworkParams p{arch, {}};
  std::mt19937_64 rng(seed);
  for (const LayerSpec &l : arch.layers) {
    if (l.kind != LayerKind::Conv) continue;
    ConvParams c(l.in_channels, l.out_channels, l.kernel, l.stride);
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (l.in_channels * l.kernel * l.kernel)));
    for (double &w : c.weights) w = nd(rng);
    p.convs.push_back(std::move(c));
  }
  return p;
}

/// Activations retained for the backward pass.
struct ForwardCache {
  std::vector<Tensor> acts;
  const Tensor &logits() const { return acts.back(); }
};

inline ForwardCache forward_cached(const NetworkParams &params, const Tensor &input) {
  const Architecture &arch = params.arch;
  if (input.channels != arch.input_channels) throw ShapeMismatch("forward: input channel count mismatch");
  const int m = arch.max_downsampling();
  if (input.height % m != 0 || input.width % m != 0)
    throw ShapeMismatch("forward: input dimensions must be multiples of " + std::to_string(m));
  ForwardCache cache;
  cache.acts.reserve(arch.layers.size() + 1);
  cache.acts.push_back(input);
  std::size_t conv_idx = 0;
  for (const LayerSpec &l : arch.layers) {
    const Tensor &x = cache.acts.back();
    switch (l.kind) {
    case LayerKind::Conv: cache.acts.push_back(conv_forward(x, params.convs.at(conv_idx++))); break;
    case LayerKind::Relu: cache.acts.push_back(relu_forward(x)); break;
    case LayerKind::Upsample2: cache.acts.push_back(upsample2_forward(x)); break;
    case LayerKind::Concat: cache.acts.push_back(concat_forward(x, cache.acts[static_cast<std::size_t>(l.skip)])); break;
    }
  }
  return cache;
}

/// Class logits (C x H x W).
inline Tensor forward(const NetworkParams &params, const Tensor &input) {
  return forward_cached(params, input).acts.back();
}

/// Backpropagates dL/dlogits; accumulates parameter gradients into `grads`
/// (which must have the shapes of `params`). Returns dL/dinput.
inline Tensor backward(const NetworkParams &params, const ForwardCache &cache, const Tensor &dlogits,
                       NetworkParams &grads) {
  const auto &layers = params.arch.layers;
  std::vector<Tensor> dacts(cache.acts.size());
  for (std::size_t i = 0; i < cache.acts.size(); ++i) {
    const Tensor &a = cache.acts[i];
    dacts[i] = Tensor(a.channels, a.height, a.width);
  }
  dacts.back() = dlogits;
  std::size_t conv_idx = params.convs.size();
  for (std::size_t li = layers.size(); li-- > 0;) {
    const LayerSpec &l = layers[li];
    const Tensor &x = cache.acts[li];
    const Tensor &dy = dacts[li + 1];
    switch (l.kind) {
    case LayerKind::Conv: {
      --conv_idx;
      const Tensor dx = conv_backward(x, params.convs[conv_idx], dy, grads.convs[conv_idx]);
      for (std::size_t q = 0; q < dx.data.size(); ++q) dacts[li].data[q] += dx.data[q];
      break;
    }
    case LayerKind::Relu: {
      const Tensor dx = relu_backward(x, dy);
      for (std::size_t q = 0; q < dx.data.size(); ++q) dacts[li].data[q] += dx.data[q];
      break;
    }
    case LayerKind::Upsample2: {
      const Tensor dx = upsample2_backward(x, dy);
      for (std::size_t q = 0; q < dx.data.size(); ++q) dacts[li].data[q] += dx.data[q];
      break;
    }
    case LayerKind::Concat:
      concat_backward(dy, dacts[li], dacts[static_cast<std::size_t>(l.skip)]);
      break;
    }
  }
  return dacts.front();
}

// --- architecture descriptor JSON ---------------------------------------

inline std::string to_string(LayerKind k) {
  switch (k) {
  case LayerKind::Conv: return "conv";
  case LayerKind::Relu: return "relu";
  case LayerKind::Upsample2: return "upsample2";
  case LayerKind::Concat: return "concat";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string &s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "relu") return LayerKind::Relu;
  if (s == "upsample2") return LayerKind::Upsample2;
  if (s == "concat") return LayerKind::Concat;
  throw FormatError("unknown layer type: " + s);
}

inline nlohmann::json to_json(const Architecture &a) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec &l : a.layers) {
    nlohmann::json j{{"type", to_string(l.kind)}};
    if (l.kind == LayerKind::Conv) {
      j["in"] = l.in_channels;
      j["out"] = l.out_channels;
      j["kernel"] = l.kernel;
      j["stride"] = l.stride;
    }
    if (l.kind == LayerKind::Concat) j["skip"] = l.skip;
    layers.push_back(j);
  }
  return {{"input_channels", a.input_channels}, {"classes", a.classes}, {"layers", layers}};
}

inline Architecture architecture_from_json(const nlohmann::json &j) {
  try {
    Architecture a;
    a.input_channels = j.at("input_channels").get<int>();
    a.classes = j.at("classes").get<int>();
    for (const auto &lj : j.at("layers")) {
      LayerSpec l;
      l.kind = layer_kind_from_string(lj.at("type").get<std::string>());
      if (l.kind == LayerKind::Conv) {
        l.in_channels = lj.at("in").get<int>();
        l.out_channels = lj.at("out").get<int>();
        l.kernel = lj.at("kernel").get<int>();
        l.stride = lj.at("stride").get<int>();
      }
      if (l.kind == LayerKind::Concat) l.skip = lj.at("skip").get<int>();
      a.layers.push_back(l);
    }
    a.validate();
    return a;
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("architecture descriptor: ") + e.what());
  }
}

} // namespace ghztof::nn
