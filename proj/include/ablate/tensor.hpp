#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ablate {

// Dense row-major float32 tensor. Anything that reduces many elements into
// one value accumulates in double before casting back.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> extents);
  Tensor(std::vector<std::int64_t> extents, std::vector<float> values);

  static Tensor zeros(std::vector<std::int64_t> extents) { return Tensor(std::move(extents)); }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  float& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  std::int64_t offset2(std::int64_t a, std::int64_t b) const { return a * shape[1] + b; }
  std::int64_t offset4(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) const {
    return ((a * shape[1] + b) * shape[2] + c) * shape[3] + d;
  }

  float at2(std::int64_t a, std::int64_t b) const { return data[static_cast<std::size_t>(offset2(a, b))]; }
  float& at2(std::int64_t a, std::int64_t b) { return data[static_cast<std::size_t>(offset2(a, b))]; }
  float at4(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) const {
    return data[static_cast<std::size_t>(offset4(a, b, c, d))];
  }
  float& at4(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    return data[static_cast<std::size_t>(offset4(a, b, c, d))];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

// Product of extents; rejects empty shapes and non-positive extents.
std::int64_t shape_count(const std::vector<std::int64_t>& extents);

std::string shape_str(const std::vector<std::int64_t>& extents);

}  // namespace ablate
