#include "ablate/tensor.hpp"

#include <cmath>
#include <sstream>

#include "ablate/error.hpp"

namespace ablate {

std::int64_t shape_count(const std::vector<std::int64_t>& extents) {
  if (extents.empty()) throw ValidationError("tensor shape must have at least one extent");
  std::int64_t n = 1;
  for (std::int64_t e : extents) {
    if (e <= 0) throw ValidationError("tensor extents must be positive, got " + shape_str(extents));
    n *= e;
  }
  return n;
}

std::string shape_str(const std::vector<std::int64_t>& extents) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < extents.size(); ++i) {
    if (i) out << 'x';
    out << extents[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(std::vector<std::int64_t> extents)
    : shape(std::move(extents)), data(static_cast<std::size_t>(shape_count(shape)), 0.f) {}

Tensor::Tensor(std::vector<std::int64_t> extents, std::vector<float> values) : shape(std::move(extents)) {
  const std::int64_t n = shape_count(shape);
  if (n != static_cast<std::int64_t>(values.size()))
    throw ValidationError("tensor data length " + std::to_string(values.size()) +
                          " does not match shape " + ablate::shape_str(shape));
  data = std::move(values);
}

bool Tensor::all_finite() const {
  for (float v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const { return ablate::shape_str(shape); }

}  // namespace ablate
