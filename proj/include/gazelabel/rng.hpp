#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace gazelabel {

// Deterministic generator used for every random draw in the library.
// splitmix64 keeps results identical across platforms and standard
// libraries, which std::normal_distribution would not guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one fresh pair of uniforms per draw keeps the call
  // sequence position-independent.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Unbiased enough for shuffling; bias of plain modulo is irrelevant at
  // the sizes used here and determinism is what matters.
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream; mixing the tag through one splitmix
  // step decorrelates nearby tags.
  Rng fork(std::uint64_t tag) const {
    Rng t(state_ ^ (0x9E3779B97F4A7C15ull * (tag + 1)));
    t.next_u64();
    return t;
  }

  Rng fork(std::uint64_t tag_a, std::uint64_t tag_b) const {
    return fork(tag_a).fork(tag_b);
  }
  Rng fork(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return fork(a).fork(b).fork(c);
  }

 private:
  std::uint64_t state_;
};

}  // namespace gazelabel
