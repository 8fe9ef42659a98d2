#pragma once

#include <cstdint>
#include <random>

namespace sonarssl {

// Stateless 64-bit mixer used to derive independent child seeds from a parent
// seed plus an index. The same (seed, index) pair always yields the same
// child, so every pipeline stage can hand out reproducible per-item seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Two-level derivation for (seed, stream, index), e.g. ("epoch" stream, epoch
// number). Streams are small caller-chosen constants.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Deterministic random source. std::mt19937_64 output is pinned by the
// standard; the distribution transforms are written out here because the
// <random> distribution classes are implementation-defined and would break
// bit-reproducibility across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1): 53 mantissa bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [0, n). n must be > 0. Uses rejection to stay unbiased.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via Box-Muller (one value per call; the pair's second
  // member is cached).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Exponential with the given mean (inverse transform).
  double exponential(double mean);

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sonarssl
