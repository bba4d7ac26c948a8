#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

namespace rainbowq {

// Deterministic RNG used everywhere in the engine.  Wraps mt19937_64 but
// implements its own uniform/normal transforms so that a fixed seed gives
// the same stream regardless of the standard library's distribution
// implementations.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Derive a child seed for a named stream.  splitmix64 finalizer over the
  // (seed, stream) pair keeps streams decorrelated.
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t raw() { return gen_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), unbiased via rejection.
  int uniform_int(int n) {
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

  // Standard normal via Box-Muller; caches the spare value.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  friend std::ostream& operator<<(std::ostream& os, const Rng& r) {
    // the cached spare travels as its bit pattern so the round trip is exact
    uint64_t bits = 0;
    std::memcpy(&bits, &r.spare_, sizeof(bits));
    os << r.gen_ << ' ' << (r.has_spare_ ? 1 : 0) << ' ' << bits;
    return os;
  }
  friend std::istream& operator>>(std::istream& is, Rng& r) {
    int spare_flag = 0;
    uint64_t bits = 0;
    is >> r.gen_ >> spare_flag >> bits;
    std::memcpy(&r.spare_, &bits, sizeof(bits));
    r.has_spare_ = spare_flag != 0;
    return is;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rainbowq
