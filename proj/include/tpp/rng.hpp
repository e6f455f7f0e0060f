#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace tpp {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator: output i of stream (seed, stream) is a pure
// function of (seed, stream, i), so rows can be drawn in any order or on any
// thread and still reproduce the same batch.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Independent child stream.
  Rng split(std::uint64_t stream) const { return Rng(key_, stream + 1); }

  // Uniform on the open interval (0, 1).
  double uniform() {
    for (;;) {
      const double u = static_cast<double>((*this)() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  double normal() {
    // Box-Muller; one of the pair is discarded so the stream stays stateless.
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tpp
