#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace knp {

using Rng = std::mt19937_64;

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Independent named sub-stream of a top-level seed, e.g.
/// substream(seed, "bootstrap", rep). Same inputs give the same stream.
inline Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0, std::uint64_t sub = 0) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  std::uint64_t s = detail::splitmix64(seed ^ detail::splitmix64(h));
  s = detail::splitmix64(s ^ detail::splitmix64(index + 0x632be59bd9b4e019ULL));
  s = detail::splitmix64(s ^ detail::splitmix64(sub + 0x2545f4914f6cdd1dULL));
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(sub)};
  return Rng(seq);
}

}  // namespace knp
