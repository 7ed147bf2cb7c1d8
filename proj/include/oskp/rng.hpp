#pragma once

/**
 * Deterministic seeding and sampling.
 *
 * Every random draw in the project goes through Stream, a splitmix64
 * generator that produces identical sequences on every platform (the
 * standard library distributions are implementation-defined, so they are
 * avoided on purpose). Substreams are derived by hashing a base seed with
 * integer or string labels; independent concerns (one problem's cost draws,
 * another problem's difficulty signal, the policy's action sampling) each
 * get their own derived stream and can never shift each other.
 */

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace oskp::rng {

// splitmix64 finalizer; doubles as the hash-combine step.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, for string labels.
inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t combine(std::uint64_t seed, std::uint64_t v) { return mix(seed ^ mix(v)); }
inline std::uint64_t combine(std::uint64_t seed, std::int64_t v) {
  return combine(seed, static_cast<std::uint64_t>(v));
}
inline std::uint64_t combine(std::uint64_t seed, int v) {
  return combine(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
}
inline std::uint64_t combine(std::uint64_t seed, std::string_view v) {
  return combine(seed, hash_str(v));
}
inline std::uint64_t combine(std::uint64_t seed, const std::string& v) {
  return combine(seed, std::string_view(v));
}
inline std::uint64_t combine(std::uint64_t seed, const char* v) {
  return combine(seed, std::string_view(v));
}

/// Fold any mix of labels into a derived seed: derive(seed, "policy", paper_id).
template <typename... Parts>
std::uint64_t derive(std::uint64_t seed, const Parts&... parts) {
  ((seed = combine(seed, parts)), ...);
  return seed;
}

/// splitmix64 stream. Cheap to construct, fine to discard after a few draws.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, n). Multiply-shift; bias is O(n / 2^64), negligible here.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return next_double() < p; }

  /// Standard normal, Box-Muller. Consumes two uniforms per call.
  double normal() {
    double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Gaussian truncated to [lo, hi] by rejection; clamps the mean after 64 misses.
  double truncated_normal(double mean, double sigma, double lo, double hi) {
    for (int i = 0; i < 64; ++i) {
      double x = mean + sigma * normal();
      if (x >= lo && x <= hi) return x;
    }
    return mean < lo ? lo : (mean > hi ? hi : mean);
  }

 private:
  std::uint64_t state_;
};

/// Stream seeded by derive(seed, parts...).
template <typename... Parts>
Stream stream(std::uint64_t seed, const Parts&... parts) {
  return Stream(derive(seed, parts...));
}

}  // namespace oskp::rng
