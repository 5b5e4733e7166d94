#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace memdep {

// Deterministic RNG with named sub-streams. Distributions are hand-rolled so
// results depend only on the seed, not on the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // Stream derivation: one run seed fans out into independent per-purpose
  // streams (e.g. "trace", "mask", "init", "sampling").
  static Rng stream(uint64_t seed, std::string_view name) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return Rng(mix(seed ^ h));
  }
  static Rng stream(uint64_t seed, std::string_view name, uint64_t index) {
    Rng r = stream(seed, name);
    return Rng(mix(r.next() + 0x9e3779b97f4a7c15ull * (index + 1)));
  }

  uint64_t next() { return eng_(); }

  // Uniform in [0, bound), bound > 0. Rejection-free modulo is fine here:
  // bounds are tiny compared to 2^64.
  uint64_t below(uint64_t bound) { return next() % bound; }

  int64_t range(int64_t lo, int64_t hi) {  // inclusive bounds
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  double real() {  // [0,1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * real() - 1.0;
      v = 2.0 * real() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return mean + stddev * u * f;
  }

  // Stable choice of k distinct indices from [0,n), ascending order.
  std::vector<int> sample_indices(int n, int k);

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace memdep
