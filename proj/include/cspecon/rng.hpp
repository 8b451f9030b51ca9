#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, substream, step, agent, good), so a trajectory does not depend on
// the order in which draws are consumed and parallel loops reproduce the
// sequential result bit for bit.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace cspecon {

// 64-bit finalizer from splitmix64.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit constexpr Philox4x32(Key key) : key_(key) {}

  constexpr Counter operator()(Counter ctr) const {
    Key k = key_;
    for (int r = 0; r < 10; ++r) {
      ctr = round(ctr, k);
      k[0] += kW0;
      k[1] += kW1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static constexpr Counter round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  Key key_;
};

// Named substreams: changing how one of them is consumed never shifts the
// others.
enum class Substream : std::uint32_t {
  kInitPrefs = 1,
  kInitPrices = 2,
  kCosts = 3,
  kDemandNoise = 4,  // seller updates (eps_d)
  kPriceNoise = 5,   // buyer updates (eps_p)
  kReplacement = 6,
};

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {
    for (std::uint32_t s = 0; s < kSubstreams; ++s) {
      const std::uint64_t k = splitmix64(seed ^ splitmix64(s));
      keys_[s] = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    }
  }

  std::uint64_t seed() const { return seed_; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform(Substream s, std::uint64_t step, std::uint32_t agent, std::uint32_t good) const {
    const auto w = block(s, step, agent, good);
    return to_unit(w[0], w[1]);
  }

  // Standard normal by Box-Muller on the two halves of one Philox block.
  double normal(Substream s, std::uint64_t step, std::uint32_t agent, std::uint32_t good) const {
    const auto w = block(s, step, agent, good);
    const double u1 = 1.0 - to_unit(w[0], w[1]);  // (0, 1]
    const double u2 = to_unit(w[2], w[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static double to_unit(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(a) << 32) | b) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  Philox4x32::Counter block(Substream s, std::uint64_t step, std::uint32_t agent,
                            std::uint32_t good) const {
    const Philox4x32 gen(keys_[static_cast<std::uint32_t>(s)]);
    return gen({good, agent, static_cast<std::uint32_t>(step),
                static_cast<std::uint32_t>(step >> 32)});
  }

  static constexpr std::uint32_t kSubstreams = 7;

  std::uint64_t seed_;
  std::array<Philox4x32::Key, kSubstreams> keys_{};
};

}  // namespace cspecon
