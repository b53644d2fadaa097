#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ssnf {

// Deterministic, platform-independent RNG. Every random decision in the
// pipeline derives from a single base seed plus named stream/counter values,
// so any point of a run can be reproduced without replaying the run.
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0, uint64_t d = 0) {
  uint64_t s = a;
  uint64_t h = splitmix64(s);
  s ^= b * 0xD1342543DE82EF95ULL;
  h ^= splitmix64(s);
  s ^= c * 0xAF251AF3B0F025B5ULL;
  h ^= splitmix64(s);
  s ^= d * 0x9E3779B97F4A7C15ULL;
  h ^= splitmix64(s);
  return h;
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // burn a few outputs to decorrelate small seeds
    splitmix64(state_);
    splitmix64(state_);
  }
  Rng(uint64_t seed, uint64_t stream, uint64_t counter = 0)
      : Rng(mix_seed(seed, stream, counter)) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // unbiased uniform integer in [0, n)
  uint64_t next_below(uint64_t n) {
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // standard normal via Box-Muller (no cached spare; two draws per call)
  double normal() {
    double u1 = next_double(), u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

// Named stream ids, so call sites never collide by accident.
namespace stream {
constexpr uint64_t kInit = 1;       // parameter initialization
constexpr uint64_t kEpochPerm = 2;  // per-epoch ray permutation
constexpr uint64_t kJitter = 3;     // per-iteration sample jitter
constexpr uint64_t kSolar = 4;      // solar ray placement
constexpr uint64_t kDepth = 5;      // depth ray subset
constexpr uint64_t kScene = 6;      // synthetic scene generation
constexpr uint64_t kCorrupt = 7;    // label corruption noise
}  // namespace stream

}  // namespace ssnf
