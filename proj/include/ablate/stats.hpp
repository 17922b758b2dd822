#pragma once

#include <span>
#include <string>

#include "ablate/tensor.hpp"

namespace ablate {

// True when `label` is among the k highest entries of the row, ties broken
// toward the lower class index so the predicted set is deterministic.
bool label_in_top_k(std::span<const float> row, int label, int k);

// Fraction of rows of logits [N,C] whose label lands in the top-k set.
double top_k_accuracy(const Tensor& logits, std::span<const int> labels, int k);

struct TestResult {
  enum class Method { exact, normal_approximation };
  double statistic = 0;  // rank-sum of the first sample, midranks for ties
  double p_value = 1;    // two-sided, in (0, 1]
  Method method = Method::exact;
};
const char* to_string(TestResult::Method m);

// Wilcoxon rank-sum. Exact two-sided p by enumerating all C(n+m, n) label
// assignments when n+m <= 20; above that, normal approximation with
// tie-corrected variance and a 0.5 continuity correction. Two-sided p is
// twice the smaller tail, capped at 1.
TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b);

struct FitResult {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;  // in [0, 1]
};

// Ordinary least squares; r^2 = 1 - SSres/SStot. Degenerate x (no spread)
// and constant y are rejected.
FitResult linear_fit(std::span<const double> x, std::span<const double> y);

// Top-k accuracy of a constant-logit classifier: the tie-break predicts
// classes 0..k-1, so this is the sum of their frequencies (k/C balanced).
double chance_level(std::span<const double> class_frequencies, int k);

}  // namespace ablate
