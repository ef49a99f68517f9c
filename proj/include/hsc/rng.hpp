#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>

namespace hsc {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Stateless: the output is a pure function of (key, counter).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit constexpr Philox4x32(Key key) : key_(key) {}
  explicit constexpr Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  constexpr Counter operator()(Counter ctr) const {
    Key k = key_;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k[0] += 0x9E3779B9u;
        k[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  Key key_;
};

/// Uniform in (0, 1) from the top 52 of 64 random bits; never returns 0 or 1
/// (with 53 bits the largest midpoint would round up to 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (std::uint64_t{hi} << 32 | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/// Standard normals addressed by (path, index). Block b of a path holds the
/// Box-Muller pair with indices 2b and 2b + 1; a path consumes indices in
/// (step, component) order.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : gen_(seed) {}

  std::array<double, 2> pair(std::uint64_t path, std::uint64_t block) const {
    const auto r = bits(path, block);
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  /// out[0..count) = normals 0..count-1 of `path`.
  void fill(std::uint64_t path, double* out, std::size_t count) const {
    for (std::size_t i = 0; i < count; i += 2) {
      const auto z = pair(path, i / 2);
      out[i] = z[0];
      if (i + 1 < count) out[i + 1] = z[1];
    }
  }

  /// 128 raw bits of block `block` of `path`.
  std::array<std::uint32_t, 4> bits(std::uint64_t path, std::uint64_t block) const {
    return gen_({static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
                 static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)});
  }

 private:
  Philox4x32 gen_;
};

}  // namespace hsc
