#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace trapnet {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine_keys(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(mix64(a + 0x9e3779b97f4a7c15ULL) ^ (b * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
}

/// Counter-based random stream keyed by (seed, stream id).
///
/// Draw number k of a stream is a pure function of (seed, stream, k), so two
/// streams built from the same pair agree bit for bit, and substreams can be
/// handed to workers without shared state.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream), key_(combine_keys(seed, stream)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix64(key_ + kGamma * ++counter_); }

  /// Uniform on (0, 1].
  double uniform() noexcept { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform on [0, 1).
  double uniform_open_right() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t r;
    do {
      r = (*this)();
    } while (r >= limit);
    return r % n;
  }

  /// Independent stream derived from this one's key.
  RngStream substream(std::uint64_t id) const noexcept { return RngStream(key_, id); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t draws() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline double exponential(RngStream& rng, double rate) { return -std::log(rng.uniform()) / rate; }

inline bool bernoulli(RngStream& rng, double p) { return rng.uniform_open_right() < p; }

/// Number of failures before the first success, success probability p in (0,1].
inline std::uint64_t geometric_failures(RngStream& rng, double p) {
  if (p >= 1.0) return 0;
  const double g = std::floor(std::log(rng.uniform()) / std::log1p(-p));
  if (!(g < 9.0e18)) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(g);
}

/// Poisson variate by sequential inversion; large means are split into chunks.
inline std::uint64_t poisson(RngStream& rng, double mean) {
  constexpr double kChunk = 30.0;
  std::uint64_t total = 0;
  while (mean > 0.0) {
    const double m = mean > kChunk ? kChunk : mean;
    mean -= m;
    double p = std::exp(-m);
    double cdf = p;
    const double u = rng.uniform_open_right();
    std::uint64_t k = 0;
    while (u > cdf && p > 0.0) {
      ++k;
      p *= m / static_cast<double>(k);
      cdf += p;
    }
    total += k;
  }
  return total;
}

}  // namespace trapnet
