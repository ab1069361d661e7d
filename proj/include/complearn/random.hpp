#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace complearn {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a; std::hash is not stable across toolchains.
constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Child seed for a named stream. Streams derived from the same parent with
/// different tags are independent, so adding a consumer never shifts another's
/// draws.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag) noexcept {
  return mix64(parent ^ mix64(hash_tag(tag)));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag,
                                    std::uint64_t index) noexcept {
  return mix64(derive_seed(parent, tag) + mix64(index + 1));
}

}  // namespace complearn
