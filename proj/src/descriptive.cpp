#include "ablate/descriptive.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ablate/error.hpp"

namespace ablate {

namespace {

DescriptiveStats describe_impl(std::vector<double> values) {
  if (values.empty()) throw ValidationError("describe: empty sample");
  DescriptiveStats s;
  s.size = static_cast<std::int64_t>(values.size());

  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  s.mean = sum / n;

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;

  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  const std::size_t half = values.size() / 2;
  s.median = (values.size() % 2) ? values[half] : 0.5 * (values[half - 1] + values[half]);

  if (s.size >= 2) {
    s.sigma = std::sqrt(m2);
    if (m2 > 0.0) {
      s.skew = m3 / std::pow(m2, 1.5);
      s.kurtosis = m4 / (m2 * m2) - 3.0;
    }
  }
  return s;
}

}  // namespace

DescriptiveStats describe(std::span<const float> values) {
  return describe_impl(std::vector<double>(values.begin(), values.end()));
}

DescriptiveStats describe(std::span<const double> values) {
  return describe_impl(std::vector<double>(values.begin(), values.end()));
}

}  // namespace ablate
