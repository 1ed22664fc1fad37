#include "oed/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oed {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// 53-bit uniform on (0,1) from two 32-bit words.
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

std::array<std::uint32_t, 4> NoiseStream::block(std::uint64_t index, std::uint32_t b) const {
  // counter: index (48 bits) | block (16 bits) | stream (64 bits)
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(index),
      static_cast<std::uint32_t>((index >> 32) & 0xFFFFu) | (b << 16),
      static_cast<std::uint32_t>(stream_),
      static_cast<std::uint32_t>(stream_ >> 32),
  };
  return philox4x32(ctr, {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
}

void NoiseStream::normals(std::uint64_t index, std::span<double> out) const {
  if (out.size() > 0x10000u) throw std::invalid_argument("NoiseStream: deviate vector too long");
  for (std::size_t c = 0; c < out.size(); c += 2) {
    const auto w = block(index, static_cast<std::uint32_t>(c / 2));
    const double u1 = to_open_unit(w[0], w[1]);
    const double u2 = to_open_unit(w[2], w[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    out[c] = r * std::cos(a);
    if (c + 1 < out.size()) out[c + 1] = r * std::sin(a);
  }
}

double NoiseStream::normal(std::uint64_t index, unsigned component) const {
  const auto w = block(index, component / 2);
  const double r = std::sqrt(-2.0 * std::log(to_open_unit(w[0], w[1])));
  const double a = 2.0 * std::numbers::pi * to_open_unit(w[2], w[3]);
  return component % 2 == 0 ? r * std::cos(a) : r * std::sin(a);
}

double NoiseStream::uniform(std::uint64_t index, unsigned component) const {
  // uniforms live in a block range disjoint from the low normal blocks
  const auto w = block(index, 0x8000u + component / 2);
  return component % 2 == 0 ? to_open_unit(w[0], w[1]) : to_open_unit(w[2], w[3]);
}

}  // namespace oed
