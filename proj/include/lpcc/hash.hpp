#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace lpcc {

/// 64-bit FNV-1a over the bytes, followed by a splitmix64 finalizer so that a
/// single flipped bit changes roughly half of the output bits.
std::uint64_t hash64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0);

inline std::uint64_t hash64(std::string_view text, std::uint64_t seed = 0) {
  return hash64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                              text.size()),
                seed);
}

}  // namespace lpcc
