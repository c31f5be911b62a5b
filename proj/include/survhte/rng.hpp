#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace survhte::rng {

// Counter-based stream generator. Each stream is keyed by
// (seed, stream id, substream id); draws within a stream are sequential
// splitmix64 steps. Streams with distinct keys are statistically
// independent and can be consumed from any thread in any order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (0x9E3779B97F4A7C15ULL + (b << 6) + (b >> 2));
  std::uint64_t z = splitmix64(s);
  return z ^ b;
}

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream_id = 0)
      : state_(mix_key(mix_key(seed, stream_id), substream_id)) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on (0,1); never returns exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; consumes two uniforms per draw (no cached spare, so the
  // per-draw stream position is stable).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double exponential(double rate) {
    if (rate <= 0.0) throw std::invalid_argument("exponential: rate must be > 0");
    return -std::log(uniform()) / rate;
  }

  // Inversion; adequate for the moderate rates used by the generators.
  long poisson(double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("poisson: lambda must be >= 0");
    if (lambda == 0.0) return 0;
    const double u = uniform();
    double p = std::exp(-lambda);
    double cdf = p;
    long k = 0;
    while (u > cdf && k < 100000) {
      ++k;
      p *= lambda / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

}  // namespace survhte::rng
