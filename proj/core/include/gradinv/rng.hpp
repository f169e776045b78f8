#pragma once

#include <cstdint>

namespace gradinv {

/// Deterministic RNG with a fixed cross-platform output sequence.
/// std distributions are implementation-defined, so uniform and normal
/// draws are generated here from raw 64-bit outputs.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  /// Uniform in [0,1), 53-bit resolution.
  double uniform01();
  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n), n >= 1.
  int64_t uniform_int(int64_t n);

 private:
  uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stable seed derivation for substreams (per-slot, per-run, ...).
uint64_t mix_seed(uint64_t seed, uint64_t stream);

}  // namespace gradinv
