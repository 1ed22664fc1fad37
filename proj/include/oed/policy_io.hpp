#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "oed/dp.hpp"

namespace oed {

inline constexpr std::uint32_t kPolicyFormatVersion = 1;

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

/// Binary layout, little endian: "OEDP", version, model name, grid axes, dt, controls,
/// prior, step count, steps x cells control indices, then the checksum of everything before it.
std::vector<unsigned char> encode_policy(const PolicyTable& policy);
PolicyTable decode_policy(std::span<const unsigned char> bytes);

void save_policy(const PolicyTable& policy, const std::string& path);
PolicyTable load_policy(const std::string& path);

/// Throws FormatError unless the policy was built for this model and exactly this grid.
void check_policy_matches(const PolicyTable& policy, const std::string& model, const Grid& grid);

void describe_policy(const PolicyTable& policy, std::ostream& os);

}  // namespace oed
