#include "ablate/rng.hpp"

#include <cmath>

#include "ablate/error.hpp"

namespace ablate {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// splitmix64 finalizer on an already-advanced state value.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += kGolden;
  return mix64(state);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& word : state_) word = splitmix64_next(s);
}

// xoshiro256**
std::uint64_t Rng::next_u64() {
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

std::uint64_t Rng::next_below(std::uint64_t bound) {
  if (bound == 0) throw ValidationError("next_below requires a positive bound");
  // Multiply-shift reduction; the bias is < bound/2^64 and the mapping is
  // a fixed function of the stream, which is what determinism needs.
  const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * bound;
  return static_cast<std::uint64_t>(wide >> 64);
}

double Rng::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller. u1 is shifted into (0, 1] so the log argument never hits 0.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = next_unit();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t take, Rng& rng) {
  if (n < 0 || take < 0 || take > n)
    throw ValidationError("sample_without_replacement: need 0 <= take <= n, got take=" +
                          std::to_string(take) + " n=" + std::to_string(n));
  std::vector<std::int64_t> indices(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;
  for (std::int64_t i = 0; i < take; ++i) {
    const std::int64_t j =
        i + static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
  }
  indices.resize(static_cast<std::size_t>(take));
  return indices;
}

void shuffle(std::vector<std::int64_t>& values, Rng& rng) {
  for (std::int64_t i = static_cast<std::int64_t>(values.size()) - 1; i > 0; --i) {
    const std::int64_t j = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(values[static_cast<std::size_t>(i)], values[static_cast<std::size_t>(j)]);
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t layer_index,
                          std::uint64_t magnitude_index, std::uint64_t trial_index) {
  // Three avalanche rounds, one per index, each offset by a distinct odd
  // constant so that (0,0,0) still scrambles the base.
  std::uint64_t z = base;
  z = mix64(z ^ ((layer_index + 1) * 0xA0761D6478BD642FULL));
  z = mix64(z ^ ((magnitude_index + 1) * 0xE7037ED1A0B428DBULL));
  z = mix64(z ^ ((trial_index + 1) * 0x8EBC6AF09C88C6E3ULL));
  return z;
}

std::uint64_t derive_stream(std::uint64_t base, std::uint64_t tag) {
  return mix64(base ^ ((tag + 1) * 0x589965CC75374CC3ULL));
}

std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t basis) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t hash = basis;
  for (std::size_t i = 0; i < len; ++i) {
    hash ^= p[i];
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

}  // namespace ablate
