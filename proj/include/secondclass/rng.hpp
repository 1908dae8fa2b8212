#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace secondclass {

using Rng = std::mt19937_64;

/// FNV-1a hash of an experiment label, used as part of the stream key.
constexpr std::uint64_t experiment_key(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Independent stream for (seed, experiment, replica). The same triple always
/// reproduces the same stream regardless of scheduling.
inline Rng make_stream(std::uint64_t seed, std::uint64_t experiment,
                       std::uint64_t replica) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(experiment),
      static_cast<std::uint32_t>(experiment >> 32),
      static_cast<std::uint32_t>(replica),
      static_cast<std::uint32_t>(replica >> 32)};
  return Rng(seq);
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Exponential waiting time with the given total rate (> 0).
inline double exponential(Rng& rng, double rate) {
  return -std::log1p(-uniform01(rng)) / rate;
}

}  // namespace secondclass
