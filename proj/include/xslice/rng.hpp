#pragma once
#include <cmath>
#include <cstdint>
#include <string_view>

namespace xslice {

// Deterministic splitmix64 stream.  Every stochastic component draws from its
// own stream derived from (master seed, label) so results are reproducible
// bit-for-bit regardless of platform or call interleaving elsewhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  static uint64_t derive(uint64_t seed, std::string_view label, uint64_t salt = 0) {
    uint64_t h = 0xcbf29ce484222325ull ^ seed;
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    h ^= salt + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
  }

  static Rng stream(uint64_t seed, std::string_view label, uint64_t salt = 0) {
    return Rng(derive(seed, label, salt));
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  // standard normal via Box-Muller (one value per pair of uniforms; the
  // spare is kept so consecutive calls stay cheap and deterministic)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // exponential with given mean (> 0)
  double exponential(double mean) {
    double u = 0.0;
    while (u <= 0.0) u = uniform();
    return -mean * std::log(u);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// FNV-1a over arbitrary bytes; used for spec digests and snapshot checksums.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace xslice
