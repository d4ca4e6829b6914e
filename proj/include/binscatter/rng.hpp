#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace binscatter {

/// Philox4x32-10 counter-based generator: a pure function of (counter, key).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Standard normals addressed by (seed, stream, draw, index). Each Philox call
/// yields two 53-bit uniforms and, through Box-Muller, two normals.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint32_t stream) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  /// Fills out[0..count) with the normals of one draw.
  template <typename Out>
  void fill(std::uint64_t draw, std::size_t count, Out&& out) const {
    std::size_t k = 0;
    for (std::uint32_t block = 0; k < count; ++block) {
      const auto r = Philox4x32::generate(
          {block, static_cast<std::uint32_t>(draw), static_cast<std::uint32_t>(draw >> 32), stream_},
          key_);
      const double u1 = to_unit((static_cast<std::uint64_t>(r[0]) << 32) | r[1]);
      const double u2 = to_unit((static_cast<std::uint64_t>(r[2]) << 32) | r[3]);
      const double rad = std::sqrt(-2.0 * std::log(u1));
      const double ang = 2.0 * std::numbers::pi * u2;
      out[k++] = rad * std::cos(ang);
      if (k < count) out[k++] = rad * std::sin(ang);
    }
  }

 private:
  // Uniform on the open interval (0, 1).
  static double to_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  Philox4x32::Key key_;
  std::uint32_t stream_;
};

}  // namespace binscatter
