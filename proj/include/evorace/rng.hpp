#pragma once

#include <cmath>
#include <cstdint>

namespace evorace {

// Purpose tags for derived random streams. Every stochastic draw in the
// engine comes from a stream keyed by (master_seed, generation, purpose,
// index), so results never depend on worker count or completion order.
enum class StreamPurpose : std::uint64_t {
  kGenomeInit = 1,
  kEval = 2,
  kEliteTrial = 3,
  kOffspring = 4,
  kTrackRetry = 5,
  kGeneralization = 6,
};

// Small counter-based generator (splitmix64 core). We roll our own instead
// of using <random> distributions because the standard does not pin their
// output sequences, and the run logs are contractually bit-reproducible.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static RngStream derive(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c) {
    std::uint64_t s = mix(master + 0x8000000000000001ull);
    s = mix(s ^ mix(a + 0x9E3779B97F4A7C15ull));
    s = mix(s ^ mix(b + 0xD1B54A32D192ED03ull));
    s = mix(s ^ mix(c + 0x8CB92BA72F3D8DD7ull));
    return RngStream(s);
  }

  static RngStream derive(std::uint64_t master, std::uint64_t generation,
                          StreamPurpose purpose, std::uint64_t index) {
    return derive(master, generation,
                  static_cast<std::uint64_t>(purpose) << 32 | index >> 32,
                  index);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [0, n). Lemire reduction; the bias is O(n / 2^64).
  std::uint32_t below(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace evorace
