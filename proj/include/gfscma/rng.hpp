#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace gfscma {

// SplitMix64 finalizer, used to spread seed material across derived streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Every random consumer owns a stream keyed by (master seed, purpose, index),
// so trials can be generated independently, out of order, and reproducibly.
enum class StreamPurpose : std::uint64_t {
  activity = 1,
  channel = 2,
  preamble_noise = 3,
  data_noise = 4,
  payload_bits = 5,
  weight_init = 6,
  snr_draw = 7,
  table_init = 8,
  preamble_gen = 9,
  eval_point = 10,
  train_run = 11,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, StreamPurpose purpose,
                                    std::uint64_t index = 0) {
  std::uint64_t s = master;
  s = splitmix64(s ^ splitmix64(static_cast<std::uint64_t>(purpose)));
  s = splitmix64(s ^ splitmix64(index));
  return s;
}

/// Seeded random stream with a fixed value sequence (mt19937_64 underneath,
/// all value transforms hand-rolled so draws are identical on any platform).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  static RandomStream derive(std::uint64_t master, StreamPurpose purpose,
                             std::uint64_t index = 0) {
    return RandomStream(derive_seed(master, purpose, index));
  }

  std::uint64_t bits() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  int uniform_int(int n) { return static_cast<int>(uniform() * n); }

  /// Standard normal via Box-Muller (second value cached).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Circularly-symmetric complex Gaussian CN(0, 1).
  std::complex<double> cgaussian() {
    const double scale = 1.0 / std::numbers::sqrt2;
    const double re = gaussian() * scale;
    const double im = gaussian() * scale;
    return {re, im};
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gfscma
