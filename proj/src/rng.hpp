#pragma once

#include <cstdint>
#include <vector>

namespace udehaze {

// Deterministic 64-bit PRNG (splitmix64). All seeded behaviour in the
// project (weight init, epoch shuffling, synthetic scenes) draws from this
// generator so that identical seeds give bit-identical results on every
// platform and compiler.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0.
  uint64_t uniform_int(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Fisher-Yates shuffle with a fixed visiting order.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream; used to give each scene/worker its own seed.
  static Rng derive(uint64_t seed, uint64_t salt) {
    Rng r(seed);
    uint64_t base = r.next_u64();
    return Rng(base ^ (salt * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
  }

 private:
  uint64_t state_;
};

}  // namespace udehaze
