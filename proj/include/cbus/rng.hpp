#pragma once

#include <cstdint>
#include <span>

namespace cbus {

// SplitMix64: counter-based PRNG (Steele, Lea & Vigna's mix function over a
// Weyl sequence). The state advances by a fixed odd constant and the output
// is a bijective mix of the counter, so a given seed produces the same
// stream on every platform. This is the generator all experiment seeds
// refer to.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Uniform over {0, ..., n-1}.
  int next_below(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // Draws an index from a normalized probability vector. The last cell
  // absorbs any rounding slack.
  int categorical(std::span<const double> probs) {
    const double u = next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace cbus
