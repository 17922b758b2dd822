#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ablate/error.hpp"
#include "ablate/rng.hpp"
#include "ablate/stats.hpp"
#include "helpers.hpp"

using namespace ablate;
using test_helpers::random_tensor;

namespace {

// Brute-force permutation oracle, written independently of the library
// path: recursive enumeration of which pooled positions belong to the
// first sample, counting both tails of the rank-sum.
struct OracleCounts {
  long total = 0, le = 0, ge = 0;
};

void enumerate(const std::vector<double>& ranks, std::size_t next, std::size_t remaining,
               double partial, double observed, OracleCounts& counts) {
  if (remaining == 0) {
    ++counts.total;
    if (partial <= observed + 1e-9) ++counts.le;
    if (partial >= observed - 1e-9) ++counts.ge;
    return;
  }
  if (ranks.size() - next < remaining) return;
  enumerate(ranks, next + 1, remaining - 1, partial + ranks[next], observed, counts);
  enumerate(ranks, next + 1, remaining, partial, observed, counts);
}

double oracle_wilcoxon_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  // midranks by sorting positions
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return pooled[x] < pooled[y]; });
  std::vector<double> ranks(pooled.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && pooled[order[j]] == pooled[order[i]]) ++j;
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mid;
    i = j;
  }
  double observed = 0;
  for (std::size_t k = 0; k < a.size(); ++k) observed += ranks[k];

  OracleCounts counts;
  enumerate(ranks, 0, a.size(), 0.0, observed, counts);
  const double tail = static_cast<double>(std::min(counts.le, counts.ge)) / counts.total;
  return std::min(1.0, 2.0 * tail);
}

}  // namespace

TEST_CASE("top-k accuracy basics") {
  Rng rng(1);
  Tensor logits = random_tensor({6, 10}, rng);
  std::vector<int> labels{0, 4, 9, 2, 7, 5};
  SUBCASE("k equal to the class count is always 1") {
    CHECK(top_k_accuracy(logits, labels, 10) == 1.0);
  }
  SUBCASE("all-equal logits predict classes 0..k-1") {
    Tensor flat({10, 10}, std::vector<float>(100, 0.5f));
    std::vector<int> balanced(10);
    std::iota(balanced.begin(), balanced.end(), 0);  // one label per class
    CHECK(top_k_accuracy(flat, balanced, 5) == 0.5);
  }
  SUBCASE("k out of range") {
    CHECK_THROWS_AS(top_k_accuracy(logits, labels, 0), ValidationError);
    CHECK_THROWS_AS(top_k_accuracy(logits, labels, 11), ValidationError);
  }
}

TEST_CASE("top-k accuracy matches a full-sort oracle") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor logits = random_tensor({8, 12}, rng);
    std::vector<int> labels(8);
    for (auto& l : labels) l = static_cast<int>(rng.next_below(12));
    for (int k : {1, 5}) {
      std::int64_t correct = 0;
      for (std::int64_t r = 0; r < 8; ++r) {
        std::vector<int> order(12);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
          if (logits.at2(r, x) != logits.at2(r, y)) return logits.at2(r, x) > logits.at2(r, y);
          return x < y;
        });
        if (std::find(order.begin(), order.begin() + k, labels[static_cast<std::size_t>(r)]) !=
            order.begin() + k)
          ++correct;
      }
      CHECK(top_k_accuracy(logits, labels, k) == doctest::Approx(correct / 8.0));
    }
  }
}

TEST_CASE("top-k accuracy is invariant to strictly monotone transforms") {
  Rng rng(3);
  Tensor logits = random_tensor({10, 9}, rng, -2.f, 2.f);
  std::vector<int> labels(10);
  for (auto& l : labels) l = static_cast<int>(rng.next_below(9));
  Tensor warped = logits;
  for (auto& v : warped.data) v = std::exp(0.7f * v) + 3.f;
  for (int k = 1; k <= 9; ++k)
    CHECK(top_k_accuracy(logits, labels, k) == top_k_accuracy(warped, labels, k));
}

TEST_CASE("wilcoxon rank-sum spec examples") {
  SUBCASE("disjoint triples") {
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    const TestResult result = wilcoxon_rank_sum(a, b);
    CHECK(result.statistic == 6.0);
    CHECK(result.p_value == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(result.method == TestResult::Method::exact);
  }
  SUBCASE("identical samples give p = 1") {
    const std::vector<double> a{5, 5}, b{5, 5};
    const TestResult result = wilcoxon_rank_sum(a, b);
    CHECK(result.p_value == 1.0);
  }
  SUBCASE("empty sample rejected") {
    const std::vector<double> a{1.0};
    CHECK_THROWS_AS(wilcoxon_rank_sum(a, {}), ValidationError);
  }
}

TEST_CASE("wilcoxon symmetry and shift invariance") {
  Rng rng(4);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<double> a(3 + rng.next_below(5)), b(3 + rng.next_below(5));
    for (auto& v : a) v = static_cast<double>(rng.next_below(8));
    for (auto& v : b) v = static_cast<double>(rng.next_below(8));
    const TestResult ab = wilcoxon_rank_sum(a, b);
    const TestResult ba = wilcoxon_rank_sum(b, a);
    CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));

    std::vector<double> a_shift = a, b_shift = b;
    for (auto& v : a_shift) v += 17.25;
    for (auto& v : b_shift) v += 17.25;
    CHECK(wilcoxon_rank_sum(a_shift, b_shift).p_value == doctest::Approx(ab.p_value).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon exact p matches the enumeration oracle on random pairs with ties") {
  Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(1 + rng.next_below(7)), b(1 + rng.next_below(7));
    // small integer values force plenty of ties
    for (auto& v : a) v = static_cast<double>(rng.next_below(5));
    for (auto& v : b) v = static_cast<double>(rng.next_below(5));
    const TestResult got = wilcoxon_rank_sum(a, b);
    CHECK(got.method == TestResult::Method::exact);
    CHECK(std::abs(got.p_value - oracle_wilcoxon_p(a, b)) < 1e-12);
  }
}

TEST_CASE("wilcoxon switches to the normal approximation above 20 pooled values") {
  // n + m = 23; reference p from an independent implementation of the
  // tie-corrected continuity-corrected asymptotic test.
  const std::vector<double> a{0.91, 0.88, 0.95, 0.87, 0.90, 0.93,
                              0.89, 0.92, 0.94, 0.86, 0.91, 0.88};
  const std::vector<double> b{0.85, 0.83, 0.88, 0.81, 0.86, 0.84,
                              0.87, 0.82, 0.80, 0.85, 0.88};
  const TestResult result = wilcoxon_rank_sum(a, b);
  CHECK(result.method == TestResult::Method::normal_approximation);
  CHECK(result.statistic == doctest::Approx(202.0));
  CHECK(result.p_value == doctest::Approx(0.00038350302445781147).epsilon(1e-9));

  // boundary: exactly 20 pooled values still enumerates
  std::vector<double> a20(10), b20(10);
  for (int i = 0; i < 10; ++i) {
    a20[static_cast<std::size_t>(i)] = i;
    b20[static_cast<std::size_t>(i)] = i + 0.5;
  }
  CHECK(wilcoxon_rank_sum(a20, b20).method == TestResult::Method::exact);

  // all-tied large samples: zero variance, p = 1
  const std::vector<double> tied_a(15, 2.0), tied_b(15, 2.0);
  CHECK(wilcoxon_rank_sum(tied_a, tied_b).p_value == 1.0);
}

TEST_CASE("linear fit spec examples") {
  SUBCASE("exact line") {
    const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    const FitResult fit = linear_fit(x, y);
    CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("closed-form normal equations") {
    const std::vector<double> x{0, 1, 2}, y{0, 1, 1};
    const FitResult fit = linear_fit(x, y);
    CHECK(fit.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("degenerate inputs") {
    CHECK_THROWS_AS(linear_fit(std::vector<double>{1, 1, 1}, std::vector<double>{0, 1, 2}),
                    ValidationError);
    CHECK_THROWS_AS(linear_fit(std::vector<double>{0, 1, 2}, std::vector<double>{4, 4, 4}),
                    ValidationError);
    CHECK_THROWS_AS(linear_fit(std::vector<double>{0}, std::vector<double>{1}), ValidationError);
  }
}

TEST_CASE("r-squared equals the squared Pearson correlation") {
  Rng rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(12), y(12);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.next_unit() * 10;
      y[i] = 3.0 * x[i] + rng.next_gaussian();
    }
    const FitResult fit = linear_fit(x, y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mx += x[i];
      my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    const double pearson = sxy / std::sqrt(sxx * syy);
    CHECK(std::abs(fit.r_squared - pearson * pearson) < 1e-10);
  }
}

TEST_CASE("chance level") {
  SUBCASE("balanced 1000 classes, 5 guesses") {
    std::vector<double> freq(1000, 1.0 / 1000.0);
    CHECK(chance_level(freq, 5) == doctest::Approx(0.005).epsilon(1e-12));
  }
  SUBCASE("k equal to C") {
    std::vector<double> freq(10, 0.1);
    CHECK(chance_level(freq, 10) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("skewed frequencies, tie-break picks class 0") {
    const std::vector<double> freq{0.5, 0.3, 0.2};
    CHECK(chance_level(freq, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("invalid inputs") {
    const std::vector<double> not_normalized{0.5, 0.2};
    CHECK_THROWS_AS(chance_level(not_normalized, 1), ValidationError);
    const std::vector<double> negative{1.2, -0.2};
    CHECK_THROWS_AS(chance_level(negative, 1), ValidationError);
    const std::vector<double> ok{0.5, 0.5};
    CHECK_THROWS_AS(chance_level(ok, 3), ValidationError);
  }
}
