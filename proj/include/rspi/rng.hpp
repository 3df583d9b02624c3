#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>

namespace rspi {

/// Philox4x32-10 counter-based generator. The 128-bit counter is split into a
/// 64-bit block index and a 64-bit stream index, so every (seed, stream) pair
/// addresses an independent sequence without any shared state.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept;

  /// Ten-round bijection of one counter block under a key.
  static Block encrypt(Block counter, Key key) noexcept;

 private:
  void refill() noexcept;

  Key key_;
  std::uint64_t block_index_ = 0;
  std::uint64_t stream_;
  Block buffer_{};
  int cursor_ = 4;
};

/// Noise source for one sample path. Identical (seed, stream_index) gives an
/// identical sequence no matter which thread or batch it is drawn from.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_index) noexcept
      : seed_(seed), stream_index_(stream_index), engine_(seed, stream_index) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_index() const noexcept { return stream_index_; }

  double normal() { return normal_(engine_); }
  void fill_normal(std::span<double> out) {
    for (auto& v : out) v = normal_(engine_);
  }
  double uniform() { return std::generate_canonical<double, 53>(engine_); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_index_;
  Philox4x32 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// SplitMix64 finalizer; used to derive independent sub-seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

}  // namespace rspi
