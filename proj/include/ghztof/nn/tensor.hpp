// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "ghztof/common.hpp"

namespace ghztof::nn {

/// Channel-major (CHW) activation tensor.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w, double fill = 0.0) : channels(c), height(h), width(w) {
    if (c < 0 || h < 0 || w < 0) throw InvalidArgument("Tensor: invalid dimensions");
    data.assign(static_cast<std::size_t>(c) * h * w, fill);
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double &operator()(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double operator()(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double *channel(int c) { return data.data() + c * plane(); }
  const double *channel(int c) const { return data.data() + c * plane(); }

  bool same_shape(const Tensor &o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

} // namespace ghztof::nn
