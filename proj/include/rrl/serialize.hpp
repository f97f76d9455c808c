#pragma once
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrl/mlp.hpp"

namespace rrl {

// Flat little-endian binary net format:
//   magic "RRLNET2" (7 bytes)
//   u32 layer count L
//   u32 widths[L+1]
//   u32 hidden activation tag, u32 output activation tag
//   u32 input norm flag; if 1: in_shift then in_scale as f64[width0]
//   per layer: weight matrix row major as f64, then biases as f64
inline constexpr char kNetMagic[7] = {'R', 'R', 'L', 'N', 'E', 'T', '2'};

namespace detail {
inline void put_u32(std::FILE* f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  if (std::fwrite(b, 1, 4, f) != 4) throw std::runtime_error("net write failed");
}
inline uint32_t get_u32(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("net file truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
inline void put_f64(std::FILE* f, const double* p, size_t n) {
  // host is little endian; doubles are written raw for bitwise round trips
  if (std::fwrite(p, sizeof(double), n, f) != n) throw std::runtime_error("net write failed");
}
inline void get_f64(std::FILE* f, double* p, size_t n) {
  if (std::fread(p, sizeof(double), n, f) != n) throw std::runtime_error("net file truncated");
}
}  // namespace detail

inline void save_net(const Mlp& net, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  try {
    if (std::fwrite(kNetMagic, 1, sizeof(kNetMagic), f) != sizeof(kNetMagic))
      throw std::runtime_error("net write failed");
    detail::put_u32(f, static_cast<uint32_t>(net.layer_count()));
    for (int d : net.dims) detail::put_u32(f, static_cast<uint32_t>(d));
    detail::put_u32(f, static_cast<uint32_t>(net.hidden_act));
    detail::put_u32(f, static_cast<uint32_t>(net.output_act));
    detail::put_u32(f, net.in_scale.empty() ? 0u : 1u);
    if (!net.in_scale.empty()) {
      detail::put_f64(f, net.in_shift.data(), net.in_shift.size());
      detail::put_f64(f, net.in_scale.data(), net.in_scale.size());
    }
    for (size_t l = 0; l < net.layer_count(); ++l) {
      detail::put_f64(f, net.w[l].a.data(), net.w[l].a.size());
      detail::put_f64(f, net.b[l].data(), net.b[l].size());
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  if (std::fclose(f) != 0) throw std::runtime_error("cannot close: " + path);
}

inline Mlp load_net(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open net file: " + path);
  try {
    char magic[sizeof(kNetMagic)];
    if (std::fread(magic, 1, sizeof(magic), f) != sizeof(magic))
      throw std::runtime_error("net file truncated: " + path);
    if (std::memcmp(magic, kNetMagic, sizeof(magic)) != 0)
      throw std::runtime_error("bad net magic in " + path);
    const uint32_t L = detail::get_u32(f);
    if (L < 1 || L > 64) throw std::runtime_error("implausible layer count in " + path);
    std::vector<int> dims(L + 1);
    size_t total = 0;
    for (auto& d : dims) {
      const uint32_t v = detail::get_u32(f);
      if (v < 1 || v > 1u << 20) throw std::runtime_error("implausible width in " + path);
      d = static_cast<int>(v);
    }
    const uint32_t ha = detail::get_u32(f), oa = detail::get_u32(f);
    if (ha > 4 || oa > 4) throw std::runtime_error("unknown activation tag in " + path);
    Mlp net(dims, static_cast<Act>(ha), static_cast<Act>(oa));
    const uint32_t has_norm = detail::get_u32(f);
    if (has_norm > 1) throw std::runtime_error("bad input norm flag in " + path);
    if (has_norm == 1) {
      std::vector<double> shift(dims[0]), scale(dims[0]);
      detail::get_f64(f, shift.data(), shift.size());
      detail::get_f64(f, scale.data(), scale.size());
      net.set_input_norm(std::move(shift), std::move(scale));
    }
    for (size_t l = 0; l < net.layer_count(); ++l) {
      detail::get_f64(f, net.w[l].a.data(), net.w[l].a.size());
      detail::get_f64(f, net.b[l].data(), net.b[l].size());
      total += net.w[l].a.size() + net.b[l].size();
    }
    (void)total;
    // trailing garbage means a different net was appended or the file is corrupt
    unsigned char probe;
    if (std::fread(&probe, 1, 1, f) == 1) throw std::runtime_error("trailing bytes in " + path);
    std::fclose(f);
    return net;
  } catch (...) {
    std::fclose(f);
    throw;
  }
}

}  // namespace rrl
