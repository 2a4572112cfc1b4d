#pragma once

// Counter-based random streams. Every stream is keyed by (master seed, batch id, row
// index), so rows can be generated in any order or in parallel with identical output.

#include <cstdint>
#include <limits>

namespace lowdeg {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Splittable seed derivation: mixes a parent seed with an index.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return splitmix64(parent ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Batch identifiers used to separate streams of different purposes under one seed.
namespace stream_id {
inline constexpr std::uint64_t null_rows = 1;
inline constexpr std::uint64_t planted_rows = 2;
inline constexpr std::uint64_t noise_rerandomize = 3;
inline constexpr std::uint64_t noise_perturb = 4;
inline constexpr std::uint64_t subsample = 5;
inline constexpr std::uint64_t nu_features = 6;
inline constexpr std::uint64_t directions = 7;
inline constexpr std::uint64_t caratheodory = 8;
inline constexpr std::uint64_t subspace = 9;
inline constexpr std::uint64_t small_ball = 10;
inline constexpr std::uint64_t anticonc = 11;
}  // namespace stream_id

/// xoshiro256** seeded from a (seed, batch, row) key. Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, std::uint64_t batch, std::uint64_t row) noexcept {
    std::uint64_t key = derive_seed(derive_seed(seed, batch), row);
    for (auto& s : state_) {
      key += 0x9E3779B97F4A7C15ULL;
      s = splitmix64(key);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
};

}  // namespace lowdeg
