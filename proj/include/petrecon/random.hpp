#pragma once

#include <cstdint>
#include <initializer_list>

namespace petrecon {

/// Mixes a base seed with stream identifiers (slice, realization, phantom...)
/// into an independent 64-bit seed. Stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::uint64_t h = splitmix(base);
  for (auto s : stream) h = splitmix(h ^ splitmix(s + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace petrecon
