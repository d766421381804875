// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace ghztof {

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }

/// Maps any finite angle onto [0, 2pi).
inline double wrap_to_2pi(double phase) {
  double w = std::fmod(phase, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

/// Maps any finite angle onto (-pi, pi].
inline double wrap_to_pi(double phase) {
  double w = std::remainder(phase, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

// Error taxonomy. Library code throws; the CLI maps these onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ShapeMismatch : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};
struct DegenerateAmplitude : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};

/// Dense H x W x N grid stored row-major with interleaved channels (HWC).
template <typename T>
struct Grid {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<T> data;

  Grid() = default;
  Grid(int h, int w, int n = 1, T fill = T{})
      : height(h), width(w), channels(n) {
    if (h < 0 || w < 0 || n < 1) throw InvalidArgument("Grid: invalid dimensions");
    data.assign(static_cast<std::size_t>(h) * w * n, fill);
  }

  std::size_t index(int y, int x, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T &operator()(int y, int x, int c = 0) { return data[index(y, x, c)]; }
  const T &operator()(int y, int x, int c = 0) const { return data[index(y, x, c)]; }

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(int h, int w) const { return height == h && width == w; }
  template <typename U>
  bool same_shape(const Grid<U> &o) const { return height == o.height && width == o.width; }
};

template <typename T, typename U>
void require_same_shape(const Grid<T> &a, const Grid<U> &b, const char *what) {
  if (!a.same_shape(b)) throw ShapeMismatch(std::string(what) + ": grid dimensions differ");
}

/// Per-pixel validity mask; nonzero means valid.
using Mask = Grid<std::uint8_t>;

inline Mask full_mask(int h, int w) { return Mask(h, w, 1, 1); }

/// SplitMix64 finalizer, used to derive independent RNG seeds from (seed, stream ids).
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

} // namespace ghztof
