#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace ablate {

// Population-style moments: sigma = sqrt(m2), skew g1 = m3/m2^1.5, excess
// kurtosis g2 = m4/m2^2 - 3, no small-sample correction. The median of an
// even-size sample is the mean of the two central order statistics.
struct DescriptiveStats {
  std::int64_t size = 0;
  double mean = 0;
  double median = 0;
  double min = 0;
  double max = 0;
  std::optional<double> sigma;     // undefined for size < 2
  std::optional<double> kurtosis;  // undefined when sigma is 0 or undefined
  std::optional<double> skew;      // likewise
};

DescriptiveStats describe(std::span<const float> values);
DescriptiveStats describe(std::span<const double> values);

}  // namespace ablate
