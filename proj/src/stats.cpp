#include "ablate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ablate/error.hpp"

namespace ablate {

namespace {

// Midranks (1-based) of the pooled sample; ties share the average rank.
std::vector<double> midranks(const std::vector<double>& pooled_sorted,
                             const std::vector<double>& values) {
  std::vector<double> rank_of(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto lo = std::lower_bound(pooled_sorted.begin(), pooled_sorted.end(), values[i]);
    const auto hi = std::upper_bound(pooled_sorted.begin(), pooled_sorted.end(), values[i]);
    const double first = static_cast<double>(lo - pooled_sorted.begin()) + 1.0;
    const double last = static_cast<double>(hi - pooled_sorted.begin());
    rank_of[i] = 0.5 * (first + last);
  }
  return rank_of;
}

double tie_term(const std::vector<double>& pooled_sorted) {
  double term = 0.0;
  std::size_t i = 0;
  while (i < pooled_sorted.size()) {
    std::size_t j = i;
    while (j < pooled_sorted.size() && pooled_sorted[j] == pooled_sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    term += t * t * t - t;
    i = j;
  }
  return term;
}

// Enumerates every C(N, n) assignment of the pooled midranks to the first
// sample and counts both tails of the rank-sum.
TestResult exact_wilcoxon(const std::vector<double>& ranks, std::size_t n, double observed) {
  const std::size_t total_n = ranks.size();
  std::vector<std::size_t> pick(n);
  std::iota(pick.begin(), pick.end(), 0);

  std::uint64_t total = 0, le = 0, ge = 0;
  const double eps = 1e-9;
  for (;;) {
    double sum = 0.0;
    for (std::size_t idx : pick) sum += ranks[idx];
    ++total;
    if (sum <= observed + eps) ++le;
    if (sum >= observed - eps) ++ge;

    // next combination, lexicographic
    std::size_t k = n;
    while (k > 0 && pick[k - 1] == total_n - n + (k - 1)) --k;
    if (k == 0) break;
    ++pick[k - 1];
    for (std::size_t j = k; j < n; ++j) pick[j] = pick[j - 1] + 1;
  }

  const double tail = static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
  TestResult result;
  result.statistic = observed;
  result.p_value = std::min(1.0, 2.0 * tail);
  result.method = TestResult::Method::exact;
  return result;
}

}  // namespace

const char* to_string(TestResult::Method m) {
  return m == TestResult::Method::exact ? "exact" : "normal-approximation";
}

bool label_in_top_k(std::span<const float> row, int label, int k) {
  const int c = static_cast<int>(row.size());
  if (label < 0 || label >= c) throw ValidationError("top-k: label out of range");
  // Rank of the label under (value desc, index asc); in the top-k set iff
  // fewer than k classes precede it.
  const float v = row[static_cast<std::size_t>(label)];
  int preceding = 0;
  for (int j = 0; j < c; ++j) {
    if (row[static_cast<std::size_t>(j)] > v || (row[static_cast<std::size_t>(j)] == v && j < label))
      ++preceding;
  }
  return preceding < k;
}

double top_k_accuracy(const Tensor& logits, std::span<const int> labels, int k) {
  if (logits.rank() != 2) throw ValidationError("top-k: logits must be [N,C]");
  const std::int64_t n = logits.dim(0), c = logits.dim(1);
  if (k < 1 || k > c)
    throw ValidationError("top-k: k=" + std::to_string(k) + " out of range [1, " +
                          std::to_string(c) + "]");
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw ValidationError("top-k: label count does not match logit rows");

  std::int64_t correct = 0;
  for (std::int64_t r = 0; r < n; ++r) {
    std::span<const float> row(logits.data.data() + r * c, static_cast<std::size_t>(c));
    if (label_in_top_k(row, labels[static_cast<std::size_t>(r)], k)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("wilcoxon: both samples must be nonempty");
  const std::size_t n = a.size(), m = b.size();

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  const std::vector<double> ranks = midranks(sorted, pooled);

  double w = 0.0;
  for (std::size_t i = 0; i < n; ++i) w += ranks[i];

  if (n + m <= 20) return exact_wilcoxon(ranks, n, w);

  const double dn = static_cast<double>(n), dm = static_cast<double>(m), total = dn + dm;
  const double mean = dn * (total + 1.0) / 2.0;
  const double variance =
      dn * dm / 12.0 * ((total + 1.0) - tie_term(sorted) / (total * (total - 1.0)));

  TestResult result;
  result.statistic = w;
  result.method = TestResult::Method::normal_approximation;
  if (variance <= 0.0) {
    result.p_value = 1.0;  // every pooled value tied
    return result;
  }
  const double centered = w - mean;
  const double correction = centered > 0 ? 0.5 : (centered < 0 ? -0.5 : 0.0);
  const double z = (centered - correction) / std::sqrt(variance);
  result.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  return result;
}

FitResult linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("linear_fit: x and y lengths differ");
  if (x.size() < 2) throw ValidationError("linear_fit: need at least 2 points");
  const double n = static_cast<double>(x.size());

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw ValidationError("linear_fit: degenerate x (no spread)");
  if (syy == 0.0) throw ValidationError("linear_fit: constant y (zero total variance)");

  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return fit;
}

double chance_level(std::span<const double> class_frequencies, int k) {
  if (class_frequencies.empty()) throw ValidationError("chance_level: empty frequency vector");
  const int c = static_cast<int>(class_frequencies.size());
  if (k < 1 || k > c) throw ValidationError("chance_level: k out of range");
  double sum = 0.0;
  for (double f : class_frequencies) {
    if (f < 0.0 || !std::isfinite(f)) throw ValidationError("chance_level: invalid frequency");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ValidationError("chance_level: frequencies sum to " + std::to_string(sum) + ", not 1");
  // Constant logits predict classes 0..k-1 under the low-index tie-break.
  double p = 0.0;
  for (int i = 0; i < k; ++i) p += class_frequencies[static_cast<std::size_t>(i)];
  return p;
}

}  // namespace ablate
