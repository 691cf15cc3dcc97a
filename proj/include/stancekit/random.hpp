#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace stancekit {

// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t basis = 0xcbf29ce484222325ULL) {
  std::uint64_t h = basis;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed split rule: child = splitmix64(parent XOR fnv1a64(stream)). Every
// module derives its seed from the global one under a fixed stream name.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream) {
  return splitmix64(parent ^ fnv1a64(stream));
}

// Portable Fisher-Yates; std::shuffle is implementation-defined.
template <typename T, typename Rng>
void deterministic_shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace stancekit
