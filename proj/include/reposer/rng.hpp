#pragma once

#include <array>
#include <cstdint>

#include "reposer/spatial.hpp"

namespace reposer {

// Philox4x32-10 (Salmon et al., SC'11). Pure function of (counter, key).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

// Independent consumers of randomness. Each gets its own slice of counter
// space so that skipping one consumer never shifts another's draws.
enum class Stream : std::uint32_t {
  Reset = 1,
  Goal = 2,
  Episode = 3,
  ObsNoise = 4,
  ActNoise = 5,
  ExternalForce = 6,
  Policy = 7,
  Camera = 8,
  Eval = 9,
  JointNoise = 10,
  Init = 11,
  Shuffle = 12,
  Reach = 13,
};

/// Counter-based generator keyed by (seed, env_id, step, stream). Two
/// instances built from the same tuple produce the same sequence regardless
/// of which thread or partition creates them.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t env_id, std::uint64_t step, Stream stream);

  std::uint32_t next_u32();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  Vec3 unit_vector();
  /// Uniformly distributed rotation (Shoemake's subgroup construction).
  Quaternion uniform_rotation();

 private:
  PhiloxKey key_;
  PhiloxCounter base_;
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace reposer
