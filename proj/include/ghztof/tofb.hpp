// SPDX-License-Identifier: Apache-2.0
#pragma once

// TOFB container: a little-endian H x W x N raster with a fixed 24-byte header.
//
//   offset  size  field
//   0       4     magic "TOFB"
//   4       2     version (u16, currently 1)
//   6       2     dtype (u16): 1 = u16 codes, 2 = IEEE-754 binary32, 3 = binary64
//   8       4     H (u32)
//   12      4     W (u32)
//   16      4     N (u32)
//   20      2     channel semantics (u16, see Semantics)
//   22      2     reserved, zero
//   24      ...   payload, row-major HWC
//
// Run metadata (frequency plan, noise, ADC, seed) lives in a JSON sidecar
// next to the raster: "<name>.tofb" pairs with "<name>.json".

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghztof/common.hpp"

namespace ghztof::tofb {

inline constexpr char kMagic[4] = {'T', 'O', 'F', 'B'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 24;

enum class DType : std::uint16_t { U16 = 1, F32 = 2, F64 = 3 };

enum class Semantics : std::uint16_t {
  Correlation = 1, // N demodulation phases
  DepthMm = 2,
  Intensity = 3,
  Recovered = 4,   // phase, amplitude, bias, valid
  Wraps = 5,
  Rgbd = 6,        // depth (mm), intensity
  Mask = 7,
  NetworkParams = 8,
  ErrorMap = 9,
};

inline std::size_t dtype_size(DType t) {
  switch (t) {
  case DType::U16: return 2;
  case DType::F32: return 4;
  case DType::F64: return 8;
  }
  throw FormatError("TOFB: unknown dtype");
}

struct Raster {
  DType dtype = DType::F32;
  Semantics semantics = Semantics::Correlation;
  Grid<double> grid;
};

namespace detail {

template <typename T>
void put_le(std::string &buf, T v) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  const U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xffu));
}

template <typename T>
T get_le(const unsigned char *p) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(p[i]) << (8 * i);
  return std::bit_cast<T>(u);
}

} // namespace detail

inline std::string encode(const Raster &r) {
  const Grid<double> &g = r.grid;
  std::string buf;
  buf.reserve(kHeaderSize + g.data.size() * dtype_size(r.dtype));
  buf.append(kMagic, 4);
  detail::put_le<std::uint16_t>(buf, kVersion);
  detail::put_le<std::uint16_t>(buf, static_cast<std::uint16_t>(r.dtype));
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.height));
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.width));
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.channels));
  detail::put_le<std::uint16_t>(buf, static_cast<std::uint16_t>(r.semantics));
  detail::put_le<std::uint16_t>(buf, 0);
  for (double v : g.data) {
    switch (r.dtype) {
    case DType::U16: {
      if (!(v >= 0.0 && v <= 65535.0) || std::nearbyint(v) != v)
        throw FormatError("TOFB: value not representable as u16 code");
      detail::put_le<std::uint16_t>(buf, static_cast<std::uint16_t>(v));
      break;
    }
    case DType::F32: detail::put_le<float>(buf, static_cast<float>(v)); break;
    case DType::F64: detail::put_le<double>(buf, v); break;
    }
  }
  return buf;
}

inline Raster decode(const std::string &bytes) {
  if (bytes.size() < kHeaderSize) throw FormatError("TOFB: truncated header");
  const auto *p = reinterpret_cast<const unsigned char *>(bytes.data());
  if (std::memcmp(p, kMagic, 4) != 0) throw FormatError("TOFB: bad magic");
  if (detail::get_le<std::uint16_t>(p + 4) != kVersion) throw FormatError("TOFB: unsupported version");
  const auto dtype_tag = detail::get_le<std::uint16_t>(p + 6);
  if (dtype_tag < 1 || dtype_tag > 3) throw FormatError("TOFB: unknown dtype");
  Raster r;
  r.dtype = static_cast<DType>(dtype_tag);
  const auto h = detail::get_le<std::uint32_t>(p + 8);
  const auto w = detail::get_le<std::uint32_t>(p + 12);
  const auto n = detail::get_le<std::uint32_t>(p + 16);
  r.semantics = static_cast<Semantics>(detail::get_le<std::uint16_t>(p + 20));
  if (n == 0 || h > (1u << 20) || w > (1u << 20) || n > (1u << 16))
    throw FormatError("TOFB: implausible dimensions");
  const std::size_t count = static_cast<std::size_t>(h) * w * n;
  const std::size_t esz = dtype_size(r.dtype);
  if (bytes.size() != kHeaderSize + count * esz) throw FormatError("TOFB: payload size mismatch");
  r.grid = Grid<double>(static_cast<int>(h), static_cast<int>(w), static_cast<int>(n));
  const unsigned char *q = p + kHeaderSize;
  for (std::size_t i = 0; i < count; ++i, q += esz) {
    switch (r.dtype) {
    case DType::U16: r.grid.data[i] = detail::get_le<std::uint16_t>(q); break;
    case DType::F32: r.grid.data[i] = detail::get_le<float>(q); break;
    case DType::F64: r.grid.data[i] = detail::get_le<double>(q); break;
    }
  }
  return r;
}

inline void write_bytes(const std::filesystem::path &path, const std::string &bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open for writing: " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path.string());
}

inline std::string read_bytes(const std::filesystem::path &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open: " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write(const std::filesystem::path &path, const Raster &r) { write_bytes(path, encode(r)); }
inline Raster read(const std::filesystem::path &path) { return decode(read_bytes(path)); }

inline std::filesystem::path sidecar_path(const std::filesystem::path &raster) {
  auto p = raster;
  p.replace_extension(".json");
  return p;
}

inline void write_json(const std::filesystem::path &path, const nlohmann::json &j) {
  write_bytes(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::filesystem::path &path) {
  try {
    return nlohmann::json::parse(read_bytes(path));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

} // namespace ghztof::tofb
