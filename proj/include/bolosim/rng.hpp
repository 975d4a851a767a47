#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bolo {

// Identifies one shot's random stream. Identical (master_seed, shot_index)
// pairs reproduce the shot bit-for-bit, independent of how the batch is split
// across workers.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t shot_index = 0;
};

namespace detail {

// SplitMix64 step; used purely as a mixing function here.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_stream_seed(SeedSpec spec) {
  // Fold the shot index into the master seed with an odd multiplier so
  // consecutive indices land far apart, then whiten twice.
  std::uint64_t state =
      spec.master_seed ^ (spec.shot_index * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
  splitmix64_next(state);
  return splitmix64_next(state);
}

} // namespace detail

// Per-shot random stream with hand-rolled variate transforms. The transforms
// are spelled out (rather than using std::*_distribution) because those are
// implementation-defined and would break bit-for-bit reproducibility across
// standard libraries.
class ShotRng {
 public:
  explicit ShotRng(SeedSpec spec) : eng_(detail::derive_stream_seed(spec)) {}

  // Uniform on (0, 1), strictly excluding both endpoints.
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Exponential with the given mean, by inversion.
  double exponential(double mean) { return -mean * std::log(uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace bolo
