// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace gwlab {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Identifies one substream: which experiment, which sub-task (usually the
/// sample size n), which replica.
struct StreamId {
  std::uint32_t experiment = 0;
  std::uint32_t task = 0;
  std::uint32_t replica = 0;
};

// Experiment ids used across the library. Changing these changes every
// reproduced number, so they are fixed.
namespace experiment_id {
inline constexpr std::uint32_t kEnergyMoments = 1;
inline constexpr std::uint32_t kW2Scan = 2;
inline constexpr std::uint32_t kSigma2MonteCarlo = 3;
inline constexpr std::uint32_t kGreenCheck = 4;
inline constexpr std::uint32_t kBootstrap = 5;
inline constexpr std::uint32_t kNearDiagonal = 6;
inline constexpr std::uint32_t kCrossValidation = 7;
inline constexpr std::uint32_t kUser = 100;
}  // namespace experiment_id

/// Counter-based random stream. The draw sequence is a pure function of
/// (seed, id), so substreams can be consumed in any order or on any thread.
///
/// Satisfies UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, StreamId id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return next_u64(); }
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Box-Muller; deterministic across platforms).
  double normal();

  std::uint64_t blocks_consumed() const { return block_; }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  StreamId id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;  // 32-bit words consumed from buffer_
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// A family of substreams sharing one master seed and experiment id.
class StreamFamily {
 public:
  StreamFamily(std::uint64_t seed, std::uint32_t experiment)
      : seed_(seed), experiment_(experiment) {}

  RandomStream substream(std::uint32_t task, std::uint32_t replica) const {
    return RandomStream(seed_, {experiment_, task, replica});
  }

  std::uint64_t seed() const { return seed_; }
  std::uint32_t experiment() const { return experiment_; }

 private:
  std::uint64_t seed_;
  std::uint32_t experiment_;
};

}  // namespace gwlab
