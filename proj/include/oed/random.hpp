#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace oed {

/// Philox4x32 with 10 rounds (Salmon et al. counter-based generator).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/**
 * @brief Counter-based source of standard normal deviates.
 *
 * A stream is the pair (seed, stream id). Component c of the deviate vector at
 * position `index` is a pure function of (seed, stream, index, c), so streams
 * can be read in any order from any thread.
 */
class NoiseStream {
 public:
  NoiseStream() = default;
  NoiseStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Fill `out` with components 0..out.size()-1 of the deviate vector at `index`.
  void normals(std::uint64_t index, std::span<double> out) const;
  double normal(std::uint64_t index, unsigned component = 0) const;

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t index, unsigned component = 0) const;

  /// Sibling stream at id stream() + offset.
  NoiseStream offset(std::uint64_t k) const { return NoiseStream(seed_, stream_ + k); }

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t index, std::uint32_t b) const;

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
};

// Stream id layout: trial in the high 32 bits, role in bits 24..31,
// particle or channel index in the low 24 bits.
inline constexpr unsigned kTrialShift = 32;
inline constexpr unsigned kRoleShift = 24;
inline constexpr std::uint64_t kMaxStreamIndex = std::uint64_t{1} << kRoleShift;

enum class StreamRole : std::uint64_t {
  truth = 0,
  observation = 1,
  control_filter = 2,
  estimation_filter = 3,
  control_resample = 4,
  estimation_resample = 5,
};

inline constexpr std::uint64_t stream_id(std::uint64_t trial, StreamRole role,
                                         std::uint64_t index = 0) {
  return (trial << kTrialShift) | (static_cast<std::uint64_t>(role) << kRoleShift) | index;
}

}  // namespace oed
