// Seeded random streams. mt19937_64 has a fully specified bit stream, and the
// uniform/normal mappings below are spelled out explicitly, so a given
// (seed, stream) pair reproduces the same draws independent of the standard
// library's distribution implementations.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pb {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

namespace detail {

// Ziggurat tables for the standard normal (256 layers, 53-bit magnitudes).
struct ZigguratTables {
  std::uint64_t k[256];
  double w[256];
  double f[256];
};

inline const ZigguratTables& ziggurat_tables() {
  static const ZigguratTables tables = [] {
    ZigguratTables t;
    constexpr double r = 3.6541528853610088;  // base layer edge
    constexpr double v = 4.92867323399e-3;    // per-layer area of exp(-x^2/2)
    constexpr double m = 9007199254740992.0;  // 2^53
    double dn = r;
    double tn = r;
    const double q = v / std::exp(-0.5 * r * r);
    t.k[0] = static_cast<std::uint64_t>((dn / q) * m);
    t.k[1] = 0;
    t.w[0] = q / m;
    t.w[255] = dn / m;
    t.f[0] = 1.0;
    t.f[255] = std::exp(-0.5 * dn * dn);
    for (int i = 254; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(v / dn + std::exp(-0.5 * dn * dn)));
      t.k[i + 1] = static_cast<std::uint64_t>((dn / tn) * m);
      tn = dn;
      t.f[i] = std::exp(-0.5 * dn * dn);
      t.w[i] = dn / m;
    }
    return t;
  }();
  return tables;
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  // Derived generator for an independent substream (per replicate, per SNP, ...).
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(splitmix64(seed ^ splitmix64(stream_id + 0x632BE59BD9B4E019ull)));
  }

  // Uniform on (0, 1].
  double uniform() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via the ziggurat method.
  double normal() {
    const auto& t = detail::ziggurat_tables();
    constexpr double r = 3.6541528853610088;
    constexpr double inv_r = 1.0 / r;
    for (;;) {
      const std::uint64_t u = gen_();
      const int iz = static_cast<int>(u & 255);
      const bool negative = (u >> 9) & 1;
      const std::uint64_t j = u >> 11;  // 53-bit magnitude
      const double x = static_cast<double>(j) * t.w[iz];
      if (j < t.k[iz]) return negative ? -x : x;  // fast path
      if (iz == 0) {
        // Tail beyond r.
        double xx, yy;
        do {
          xx = -std::log(uniform()) * inv_r;
          yy = -std::log(uniform());
        } while (yy + yy < xx * xx);
        return negative ? -(r + xx) : (r + xx);
      }
      if (t.f[iz] + uniform() * (t.f[iz - 1] - t.f[iz]) < std::exp(-0.5 * x * x)) {
        return negative ? -x : x;
      }
    }
  }

  std::uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace pb
