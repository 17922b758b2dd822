#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace ablate {

// splitmix64 step: advances the state and returns the mixed output.
std::uint64_t splitmix64_next(std::uint64_t& state);

// Deterministic stream backing every random choice in the project.
// xoshiro256** seeded via splitmix64, uniform doubles from the top 53 bits,
// Gaussians via Box-Muller. No standard-library distributions anywhere, so
// a (seed, call sequence) pair replays bit-identically across builds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, bound) via the multiply-shift reduction. bound > 0.
  std::uint64_t next_below(std::uint64_t bound);
  // Uniform in [0, 1), 53-bit resolution.
  double next_unit();
  // Standard normal; pairs are generated together and the spare is cached.
  double next_gaussian();

 private:
  std::array<std::uint64_t, 4> state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Partial Fisher-Yates over 0..n-1: the first `take` entries of the shuffle,
// in selection order. take <= n.
std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t take, Rng& rng);

void shuffle(std::vector<std::int64_t>& values, Rng& rng);

// Per-trial seed for a sweep cell: splitmix64 avalanche over the packed
// indices. The constant set is frozen by a test vector in the test suite.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t layer_index,
                          std::uint64_t magnitude_index, std::uint64_t trial_index);

// Auxiliary deterministic stream for a (base seed, purpose tag) pair.
// Tag 1 is the per-sweep evaluation-subset shuffle.
std::uint64_t derive_stream(std::uint64_t base, std::uint64_t tag);

std::uint64_t fnv1a64(const void* bytes, std::size_t len,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace ablate
