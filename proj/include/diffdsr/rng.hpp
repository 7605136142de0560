#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (key, operation id, element index), so fields can be filled in any order
// or in parallel and still reproduce bit for bit.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace diffdsr {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using counter_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static counter_type generate(counter_type ctr, key_type key) noexcept {
    ctr = round(ctr, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
      ctr = round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static counter_type round(const counter_type& c, const key_type& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// SplitMix64 finalizer; used to derive child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Child seed for a (parent, label) pair, e.g. (run seed, scene index).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label) noexcept {
  return mix64(parent ^ mix64(label + 0x632BE59BD9B4E019ull));
}

/// Operation ids partition the counter space so that unrelated draws
/// sharing one seed never collide.
enum class StreamId : std::uint32_t {
  DegradeNoise = 1,
  DegradeSparsify = 2,
  NoiseProposal = 3,
  RandomTimestep = 4,
  SceneLayout = 5,
  SceneTexture = 6,
  Test = 99,
};

class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Four raw 32-bit words for (stream, index, lane).
  Philox4x32::counter_type block(StreamId stream, std::uint64_t index,
                                 std::uint32_t lane = 0) const noexcept {
    const Philox4x32::counter_type ctr{static_cast<std::uint32_t>(index),
                                       static_cast<std::uint32_t>(index >> 32),
                                       static_cast<std::uint32_t>(stream), lane};
    const Philox4x32::key_type key{static_cast<std::uint32_t>(seed_),
                                   static_cast<std::uint32_t>(seed_ >> 32)};
    return Philox4x32::generate(ctr, key);
  }

  std::uint64_t bits(StreamId stream, std::uint64_t index, std::uint32_t lane = 0) const noexcept {
    const auto b = block(stream, index, lane);
    return (std::uint64_t{b[0]} << 32) | b[1];
  }

  /// Uniform on [0, 1).
  double uniform(StreamId stream, std::uint64_t index, std::uint32_t lane = 0) const noexcept {
    return static_cast<double>(bits(stream, index, lane) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on one Philox block.
  double normal(StreamId stream, std::uint64_t index, std::uint32_t lane = 0) const noexcept {
    const auto b = block(stream, index, lane);
    const std::uint64_t w0 = (std::uint64_t{b[0]} << 32) | b[1];
    const std::uint64_t w1 = (std::uint64_t{b[2]} << 32) | b[3];
    // u1 in (0, 1] keeps the logarithm finite.
    const double u1 = static_cast<double>((w0 >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
};

}  // namespace diffdsr
