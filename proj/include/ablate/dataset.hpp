#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ablate/tensor.hpp"

namespace ablate {

struct Dataset {
  Tensor images;            // [N, C, H, W]
  std::vector<int> labels;  // each in [0, class_count)
  int class_count = 0;

  std::int64_t count() const { return images.rank() == 4 ? images.dim(0) : 0; }
};

// IDX loader (big-endian headers): images magic 0x00000803 with dims
// [N,H,W] of unsigned bytes, labels magic 0x00000801 with dims [N].
// Pixels are scaled to [0,1]; counts must agree between the two files.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Inverse helper for fixtures and converters. Pixel values are clamped to
// [0,1] and rounded to bytes, so exact round-trips need multiples of 1/255.
void write_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path);

struct SynthSpec {
  int classes = 10;
  int per_class = 200;
  int image_size = 16;
  double noise = 0.1;
  double test_fraction = 0.2;
};

// Single-channel class templates (an oriented bar plus an offset blob, both
// keyed by class index) with i.i.d. Gaussian pixel noise on top. Pure
// function of (spec, seed). Samples are interleaved c0,c1,...,c0,c1,...
Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed);

// Deterministic balanced split: for every class, the last
// round(count*test_fraction) occurrences go to the test set.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double test_fraction);

// Per-pixel (x - mean) / std.
Dataset normalize(const Dataset& data, float mean, float std);

Dataset gather(const Dataset& data, std::span<const std::int64_t> indices);

std::vector<double> class_frequencies(const Dataset& data);

}  // namespace ablate
