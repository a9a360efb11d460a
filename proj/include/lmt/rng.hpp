#pragma once

#include <cstdint>
#include <limits>

namespace lmt {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Small counter-based generator (splitmix64 stream). Satisfies
/// UniformRandomBitGenerator so it plugs into <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Identifies one independent random stream. Every (trial, agent, round, local step)
/// tuple gets its own stream so serial and parallel execution draw identical samples.
struct StreamKey {
  std::uint64_t master_seed = 0;
  std::uint64_t trial = 0;
  std::uint64_t agent = 0;
  std::uint64_t round = 0;
  std::uint64_t local_step = 0;
};

inline constexpr std::uint64_t derive_seed(const StreamKey& k) {
  std::uint64_t h = splitmix64(k.master_seed);
  h = splitmix64(h ^ k.trial);
  h = splitmix64(h ^ k.agent);
  h = splitmix64(h ^ k.round);
  h = splitmix64(h ^ k.local_step);
  return h;
}

/// Hands out per-(agent, round, local step) generators for one trial.
class StreamFactory {
 public:
  StreamFactory() = default;
  StreamFactory(std::uint64_t master_seed, std::uint64_t trial) : master_(master_seed), trial_(trial) {}

  CounterRng stream(std::uint64_t agent, std::uint64_t round, std::uint64_t local_step) const {
    return CounterRng(derive_seed({master_, trial_, agent, round, local_step}));
  }

  std::uint64_t master_seed() const { return master_; }
  std::uint64_t trial() const { return trial_; }

 private:
  std::uint64_t master_ = 0;
  std::uint64_t trial_ = 0;
};

}  // namespace lmt
