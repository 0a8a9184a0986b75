#ifndef PEAKTRACK_RNG_HPP
#define PEAKTRACK_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace pt {

// Reproducible random source. The engine (mt19937_64) is fully specified by
// the standard; the uniform and normal transforms are hand-rolled because the
// standard-library distributions are implementation-defined and would break
// bit-identical output across toolchains.
class Random {
public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
      u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t next_u64() { return engine_(); }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// splitmix64 finalizer, used to derive well-separated substream seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent per-index stream for a given master seed. Used so that
// parallel workers produce schedule-independent results.
inline Random substream(std::uint64_t master_seed, std::uint64_t index) {
  return Random(mix_seed(master_seed, index));
}

} // namespace pt

#endif
