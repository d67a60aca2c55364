// Counter-based deterministic RNG. Every draw is a pure function of
// (seed, stream, counter), so generators never share hidden state and
// replays are exact across platforms.
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace sitegp {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  // Derive an independent stream, e.g. one per fold or per task.
  Rng stream(std::uint64_t id) const {
    return Rng(seed_, detail::splitmix64(stream_ ^ (id * 0x9e3779b97f4a7c15ULL)));
  }

  std::uint64_t next_u64() {
    std::uint64_t v = detail::splitmix64(seed_ ^ detail::splitmix64(stream_ + counter_));
    ++counter_;
    return v;
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one fresh pair per call, spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Poisson by inversion for small means, normal approx rejection for large.
  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
      double L = std::exp(-mean);
      double p = 1.0;
      std::uint64_t k = 0;
      do {
        ++k;
        p *= uniform();
      } while (p > L);
      return k - 1;
    }
    // PTRS-lite: sufficient for synthetic data generation.
    while (true) {
      double g = mean + std::sqrt(mean) * normal();
      if (g < 0.0) continue;
      auto k = static_cast<std::uint64_t>(std::floor(g + 0.5));
      return k;
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stable stream id from a label, for self-describing derived streams.
inline std::uint64_t stream_id(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sitegp
