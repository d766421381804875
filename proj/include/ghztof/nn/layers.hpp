// SPDX-License-Identifier: Apache-2.0
#pragma once

// Forward and backward passes for the layer types used by the wrap classifier.
// All convolutions use zero "same" padding of kernel/2.

#include <algorithm>
#include <vector>

#include "ghztof/nn/tensor.hpp"

namespace ghztof::nn {

/// Convolution weights laid out [out][in][ky][kx].
struct ConvParams {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  std::vector<double> weights;
  std::vector<double> bias;

  ConvParams() = default;
  ConvParams(int in, int out, int k, int s)
      : in_channels(in), out_channels(out), kernel(k), stride(s),
        weights(static_cast<std::size_t>(in) * out * k * k, 0.0), bias(static_cast<std::size_t>(out), 0.0) {}

  std::size_t widx(int o, int i, int ky, int kx) const {
    return ((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx;
  }
  std::size_t size() const { return weights.size() + bias.size(); }
};

inline int conv_out_size(int n, int kernel, int stride) { return (n + 2 * (kernel / 2) - kernel) / stride + 1; }

namespace detail {

/// Output index range [lo, hi) whose input tap (o * stride + k - pad) stays in [0, n_in).
inline void tap_range(int n_out, int n_in, int k, int pad, int stride, int &lo, int &hi) {
  lo = 0;
  while (lo < n_out && lo * stride + k - pad < 0) ++lo;
  hi = n_out;
  while (hi > lo && (hi - 1) * stride + k - pad >= n_in) --hi;
}

} // namespace detail

inline Tensor conv_forward(const Tensor &in, const ConvParams &p) {
  if (in.channels != p.in_channels) throw ShapeMismatch("conv: input channel count mismatch");
  const int k = p.kernel, s = p.stride, pad = k / 2;
  const int ho = conv_out_size(in.height, k, s), wo = conv_out_size(in.width, k, s);
  Tensor out(p.out_channels, ho, wo);
  for (int o = 0; o < p.out_channels; ++o) {
    double *dst = out.channel(o);
    std::fill(dst, dst + out.plane(), p.bias[static_cast<std::size_t>(o)]);
    for (int i = 0; i < p.in_channels; ++i) {
      const double *src = in.channel(i);
      for (int ky = 0; ky < k; ++ky) {
        int ylo, yhi;
        detail::tap_range(ho, in.height, ky, pad, s, ylo, yhi);
        for (int kx = 0; kx < k; ++kx) {
          const double wv = p.weights[p.widx(o, i, ky, kx)];
          if (wv == 0.0) continue;
          int xlo, xhi;
          detail::tap_range(wo, in.width, kx, pad, s, xlo, xhi);
          for (int y = ylo; y < yhi; ++y) {
            double *drow = dst + static_cast<std::size_t>(y) * wo;
            const double *srow = src + static_cast<std::size_t>(y * s + ky - pad) * in.width + (kx - pad);
            if (s == 1) {
              for (int x = xlo; x < xhi; ++x) drow[x] += wv * srow[x];
            } else {
              for (int x = xlo; x < xhi; ++x) drow[x] += wv * srow[x * s];
            }
          }
        }
      }
    }
  }
  return out;
}

/// Accumulates dW, db into `grad` and returns dL/d(input).
inline Tensor conv_backward(const Tensor &in, const ConvParams &p, const Tensor &dout, ConvParams &grad) {
  const int k = p.kernel, s = p.stride, pad = k / 2;
  const int ho = dout.height, wo = dout.width;
  Tensor din(in.channels, in.height, in.width);
  for (int o = 0; o < p.out_channels; ++o) {
    const double *g = dout.channel(o);
    double bsum = 0.0;
    for (std::size_t q = 0; q < dout.plane(); ++q) bsum += g[q];
    grad.bias[static_cast<std::size_t>(o)] += bsum;
    for (int i = 0; i < p.in_channels; ++i) {
      const double *src = in.channel(i);
      double *dsrc = din.channel(i);
      for (int ky = 0; ky < k; ++ky) {
        int ylo, yhi;
        detail::tap_range(ho, in.height, ky, pad, s, ylo, yhi);
        for (int kx = 0; kx < k; ++kx) {
          const double wv = p.weights[p.widx(o, i, ky, kx)];
          int xlo, xhi;
          detail::tap_range(wo, in.width, kx, pad, s, xlo, xhi);
          double wsum = 0.0;
          for (int y = ylo; y < yhi; ++y) {
            const double *grow = g + static_cast<std::size_t>(y) * wo;
            const std::size_t off = static_cast<std::size_t>(y * s + ky - pad) * in.width + (kx - pad);
            const double *srow = src + off;
            double *dsrow = dsrc + off;
            if (s == 1) {
              double acc[4] = {0.0, 0.0, 0.0, 0.0};
              int x = xlo;
              for (; x + 3 < xhi; x += 4)
                for (int j = 0; j < 4; ++j) acc[j] += grow[x + j] * srow[x + j];
              for (; x < xhi; ++x) acc[0] += grow[x] * srow[x];
              wsum += (acc[0] + acc[1]) + (acc[2] + acc[3]);
              for (x = xlo; x < xhi; ++x) dsrow[x] += wv * grow[x];
            } else {
              for (int x = xlo; x < xhi; ++x) {
                wsum += grow[x] * srow[x * s];
                dsrow[x * s] += wv * grow[x];
              }
            }
          }
          grad.weights[p.widx(o, i, ky, kx)] += wsum;
        }
      }
    }
  }
  return din;
}

inline Tensor relu_forward(const Tensor &in) {
  Tensor out = in;
  for (double &v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

inline Tensor relu_backward(const Tensor &in, const Tensor &dout) {
  Tensor din = dout;
  for (std::size_t q = 0; q < din.data.size(); ++q)
    if (!(in.data[q] > 0.0)) din.data[q] = 0.0;
  return din;
}

/// Nearest-neighbour 2x upsampling.
inline Tensor upsample2_forward(const Tensor &in) {
  Tensor out(in.channels, in.height * 2, in.width * 2);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out(c, y, x) = in(c, y / 2, x / 2);
  return out;
}

inline Tensor upsample2_backward(const Tensor &in, const Tensor &dout) {
  Tensor din(in.channels, in.height, in.width);
  for (int c = 0; c < dout.channels; ++c)
    for (int y = 0; y < dout.height; ++y)
      for (int x = 0; x < dout.width; ++x) din(c, y / 2, x / 2) += dout(c, y, x);
  return din;
}

/// Channel concatenation [a; b].
inline Tensor concat_forward(const Tensor &a, const Tensor &b) {
  if (a.height != b.height || a.width != b.width) throw ShapeMismatch("concat: spatial dimensions differ");
  Tensor out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

inline void concat_backward(const Tensor &dout, Tensor &da, Tensor &db) {
  const auto split = static_cast<std::ptrdiff_t>(da.data.size());
  for (std::size_t q = 0; q < da.data.size(); ++q) da.data[q] += dout.data[q];
  for (std::size_t q = 0; q < db.data.size(); ++q) db.data[q] += dout.data[static_cast<std::size_t>(split) + q];
}

} // namespace ghztof::nn
