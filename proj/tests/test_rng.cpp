#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "ablate/error.hpp"
#include "ablate/rng.hpp"

using namespace ablate;

TEST_CASE("splitmix64 reproduces the reference sequence") {
  // Canonical vectors for the fixed-increment SplittableRandom variant.
  std::uint64_t state = 0;
  CHECK(splitmix64_next(state) == 0xE220A8397B1DCDAFULL);
  CHECK(splitmix64_next(state) == 0x6E789E6AA1B965F4ULL);
  CHECK(splitmix64_next(state) == 0x06C45D188009454FULL);
}

TEST_CASE("fnv1a64 reference vectors") {
  CHECK(fnv1a64("", 0) == 0xCBF29CE484222325ULL);
  CHECK(fnv1a64("a", 1) == 0xAF63DC4C8601EC8CULL);
  CHECK(fnv1a64("foobar", 6) == 0x85944171F73967E8ULL);
}

TEST_CASE("derive_seed frozen test vectors") {
  // Computed once from the reference mixer and pinned; a change here means
  // every published sweep seed changes.
  CHECK(derive_seed(0x9E3779B97F4A7C15ULL, 1, 2, 3) == 0xACA926FD6F09AC78ULL);
  CHECK(derive_seed(0, 0, 0, 0) == 0x2522C476D038A002ULL);
  CHECK(derive_stream(42, 1) == 0xB806ADDAED6CDC9DULL);
}

TEST_CASE("derive_seed is deterministic and index-sensitive") {
  CHECK(derive_seed(7, 1, 2, 3) == derive_seed(7, 1, 2, 3));
  Rng rng(2024);
  for (int probe = 0; probe < 1000000; ++probe) {
    const std::uint64_t base = rng.next_u64();
    const std::uint64_t layer = rng.next_below(64);
    const std::uint64_t mag = rng.next_below(64);
    const std::uint64_t trial = rng.next_below(1000);
    std::uint64_t other_trial = rng.next_below(1000);
    if (other_trial == trial) other_trial = trial + 1;
    REQUIRE(derive_seed(base, layer, mag, trial) != derive_seed(base, layer, mag, other_trial));
  }
  // Neighbouring cells in a realistic grid never collide either.
  std::set<std::uint64_t> seen;
  for (std::uint64_t l = 0; l < 12; ++l)
    for (std::uint64_t m = 0; m < 16; ++m)
      for (std::uint64_t t = 0; t < 32; ++t) REQUIRE(seen.insert(derive_seed(1234, l, m, t)).second);
}

TEST_CASE("next_below stays in range and rejects zero") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t v = rng.next_below(17);
    CHECK(v < 17);
  }
  CHECK_THROWS_AS(rng.next_below(0), ValidationError);
}

TEST_CASE("next_unit is in [0,1)") {
  Rng rng(6);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("gaussian draws have standard-normal sample moments") {
  Rng rng(123);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.next_gaussian();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double std = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(std - 1.0) < 0.02);
}

TEST_CASE("sample_without_replacement picks exactly k distinct in-range indices") {
  Rng rng(9);
  const auto picks = sample_without_replacement(100, 37, rng);
  CHECK(picks.size() == 37);
  std::set<std::int64_t> unique(picks.begin(), picks.end());
  CHECK(unique.size() == 37);
  for (std::int64_t p : picks) {
    CHECK(p >= 0);
    CHECK(p < 100);
  }

  Rng replay(9);
  CHECK(sample_without_replacement(100, 37, replay) == picks);

  Rng rng2(10);
  CHECK(sample_without_replacement(5, 0, rng2).empty());
  const auto all = sample_without_replacement(5, 5, rng2);
  std::set<std::int64_t> full(all.begin(), all.end());
  CHECK(full.size() == 5);
  CHECK_THROWS_AS(sample_without_replacement(3, 4, rng2), ValidationError);
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<std::int64_t> values{0, 1, 2, 3, 4, 5, 6, 7};
  Rng rng(11);
  shuffle(values, rng);
  std::vector<std::int64_t> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::int64_t>{0, 1, 2, 3, 4, 5, 6, 7});

  std::vector<std::int64_t> again{0, 1, 2, 3, 4, 5, 6, 7};
  Rng replay(11);
  shuffle(again, replay);
  CHECK(again == values);
}
