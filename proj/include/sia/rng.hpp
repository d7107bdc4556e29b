#pragma once

#include <cstdint>

namespace sia {

// splitmix64 step; the whole project derives its randomness from this
// stream so runs are reproducible across platforms and languages.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d49bb133111aebull;
  return z ^ (z >> 31);
}

// Derives an independent child seed from (seed, tag).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = seed ^ (tag * 0xd6e8feb86659fd93ull + 0x2545f4914f6cdd1dull);
  return splitmix64(s);
}

// Small deterministic generator with the handful of distributions the
// toy world needs. Not a stats-grade RNG, but portable and seedable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [lo, hi] inclusive
  long uniform_int(long lo, long hi);

  bool bernoulli(double p) { return uniform01() < p; }

  // standard normal via Box-Muller
  double normal();

  double gamma(double alpha);
  double beta(double a, double b);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sia
