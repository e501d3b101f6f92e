#pragma once

#include <cstdint>
#include <string_view>

namespace maxent {

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for an independent named stream derived from one master seed.
/// Every random consumer (prior draws, noise, ABC, ...) asks for its own stream
/// so adding a consumer never shifts the numbers another one sees.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::string_view stream) {
  return mix_seed(master ^ mix_seed(fnv1a(stream)));
}

}  // namespace maxent
