#pragma once

#include <cmath>
#include <cstdint>

namespace covflow::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

/// Child key for the hierarchy master -> trial -> layer -> row.
inline std::uint64_t derive(std::uint64_t key, std::uint64_t tag) {
  return mix64((key ^ 0xA0761D6478BD642Full) + mix64(tag + kGolden));
}

namespace detail {

struct ZigTables {
  double x[129];
  double ratio[128];
};

inline ZigTables make_zig_tables() {
  // Doornik ZIGNOR layout, 128 strips.
  constexpr double R = 3.442619855899;
  constexpr double V = 9.91256303526217e-3;
  ZigTables t{};
  double f = std::exp(-0.5 * R * R);
  t.x[0] = V / f;
  t.x[1] = R;
  t.x[128] = 0.0;
  for (int i = 2; i < 128; ++i) {
    t.x[i] = std::sqrt(
        -2.0 * std::log(V / t.x[i - 1] +
                        std::exp(-0.5 * t.x[i - 1] * t.x[i - 1])));
  }
  for (int i = 0; i < 128; ++i) t.ratio[i] = t.x[i + 1] / t.x[i];
  return t;
}

inline const ZigTables kZig = make_zig_tables();
inline constexpr double kZigR = 3.442619855899;

}  // namespace detail

/// Counter-based stream: output i is mix64(key + i * golden), i.e. SplitMix64
/// seeded at the key. Streams with distinct keys are disjoint; a stream never
/// shares state, so trials can run on any thread.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1).
  double next_double_open() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  /// Standard normal via the ziggurat.
  double next_gaussian() {
    const auto& T = detail::kZig;
    for (;;) {
      std::uint64_t z = next_u64();
      int i = static_cast<int>(z & 127);
      double u = static_cast<double>(z >> 11) * 0x1.0p-52 - 1.0;
      if (std::fabs(u) < T.ratio[i]) return u * T.x[i];
      if (i == 0) {
        double x, y;
        do {
          x = std::log(next_double_open()) / detail::kZigR;
          y = std::log(next_double_open());
        } while (-2.0 * y < x * x);
        return u < 0.0 ? x - detail::kZigR : detail::kZigR - x;
      }
      double xx = u * T.x[i];
      double f0 = std::exp(-0.5 * (T.x[i] * T.x[i] - xx * xx));
      double f1 = std::exp(-0.5 * (T.x[i + 1] * T.x[i + 1] - xx * xx));
      if (f1 + next_double_open() * (f0 - f1) < 1.0) return xx;
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace covflow::rng
