#pragma once

#include <cmath>
#include <cstdint>

namespace causalcmp {

// SplitMix64 finalizer. Used both as the output function of the
// counter-based generator and to derive substream keys.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based 64-bit generator: output i of stream `key` is
/// mix64(key + i * golden_gamma). Streams for (run, variable, replicate)
/// are derived by key chaining, so any substream can be regenerated
/// independently of scheduling order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static std::uint64_t derive(std::uint64_t key, std::uint64_t id) {
    return mix64(key ^ (0xd1b54a32d192ed03ULL + mix64(id)));
  }

  CounterRng stream(std::uint64_t id) const { return CounterRng(derive(key_, id)); }

  std::uint64_t next_u64() {
    return mix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes two uniforms per pair.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    // avoid log(0)
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  int next_bernoulli(double p) { return next_double() < p ? 1 : 0; }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // multiply-shift; bias is negligible for n << 2^64
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Fixed stream ids so cross-module derivations never collide.
namespace stream_id {
inline constexpr std::uint64_t simulate = 1;
inline constexpr std::uint64_t bootstrap = 2;
inline constexpr std::uint64_t monte_carlo_run = 3;
inline constexpr std::uint64_t null_companion = 4;
inline constexpr std::uint64_t var_z = 10;
inline constexpr std::uint64_t var_w0 = 11;
inline constexpr std::uint64_t var_w1 = 12;
inline constexpr std::uint64_t var_u = 13;
inline constexpr std::uint64_t var_y0 = 14;
inline constexpr std::uint64_t var_x = 15;
inline constexpr std::uint64_t var_y1 = 16;
}  // namespace stream_id

}  // namespace causalcmp
