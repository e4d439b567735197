#pragma once

#include <cmath>
#include <cstdint>

namespace pmvc {

// Counter-based splittable generator: value i of a stream is a SplitMix64-style
// mix of (key, i), so draws are position-addressable and split() derives an
// independent stream deterministically. One seed drives every stochastic
// component (init, binarization, data synthesis) through named splits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ 0x9E3779B97F4A7C15ull, stream ^ 0xD6E8FEB86659FD93ull)) {}

  Rng split(std::uint64_t tag) const {
    Rng child(0);
    child.key_ = mix(key_, tag ^ 0xA0761D6478BD642Full);
    return child;
  }

  std::uint64_t next_u64() { return mix(key_, counter_++); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // [lo, hi] inclusive
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  float normal(float mean = 0.0f, float stddev = 1.0f) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = static_cast<float>(r * std::sin(a));
    have_spare_ = true;
    return mean + stddev * static_cast<float>(r * std::cos(a));
  }

 private:
  static std::uint64_t mix(std::uint64_t key, std::uint64_t ctr) {
    std::uint64_t z = key + ctr * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  float spare_ = 0.0f;
};

}  // namespace pmvc
