#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace seqemp {

// SplitMix64 finalizer. Used to derive independent engine seeds from
// (seed, stream index) pairs.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

// Random stream addressed as stream(seed, index): the state of replication r
// never depends on how many draws replication r-1 consumed, so replications
// can run in any order or in parallel and still reproduce bit for bit.
//
// Uniforms are built from the top 53 bits of mt19937_64 output; normals use
// Boost's ziggurat, whose output is fixed by the Boost implementation (unlike
// std::normal_distribution).
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t index) : engine_(derive_seed(seed, index)) {}

  // Open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_(engine_); }

  // Child stream keyed by the parent's next raw draw.
  Stream split(std::uint64_t index) { return Stream(engine_(), index); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace seqemp
