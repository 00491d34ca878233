#pragma once

#include <cstdint>
#include <random>

namespace advseg {

// Seeded random stream with hand-rolled uniform/normal transforms so the
// produced sequence is identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int uniform_int(int lo, int hi);

  // standard normal via Box-Muller, spare value cached
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Derives an independent stream from a base seed and a stream id, so that
  // consumers (init, shuffling, synthesis) cannot shift each other's draws.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// splitmix64 mixing step; used for seed derivation.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace advseg
