#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace vrsim {

/// Deterministic random source. All distributions are implemented explicitly
/// (Box-Muller for normals) so sequences are identical across standard
/// libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Derives an independent named sub-stream from a root seed. Changing the
  /// label changes only the consumer of that stream.
  static Rng stream(std::uint64_t root, std::string_view name) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
    for (char c : name) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 1099511628211ull;
    }
    return Rng(splitmix(root ^ h));
  }

  Rng substream(std::uint64_t index) {
    // independent child stream, e.g. one per user or per slot
    return Rng(splitmix(gen_() ^ splitmix(index + 0x9e3779b97f4a7c15ull)));
  }

  std::uint64_t raw() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = gen_();
    } while (r >= limit);
    return static_cast<int>(r % bound);
  }

  /// Normal(mean, stddev^2) via Box-Muller; consumes exactly two uniforms.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  /// Circularly-symmetric complex Gaussian with per-entry variance `var`.
  std::complex<double> cnormal(double var) {
    const double s = std::sqrt(var / 2.0);
    return {normal(0.0, s), normal(0.0, s)};
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 gen_;
};

}  // namespace vrsim
