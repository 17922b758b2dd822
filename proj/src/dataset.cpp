#include "ablate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "ablate/error.hpp"
#include "ablate/rng.hpp"

namespace ablate {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;  // unsigned byte, 3 dims
constexpr std::uint32_t kLabelsMagic = 0x00000801;  // unsigned byte, 1 dim

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& path) {
  if (offset + 4 > bytes.size()) throw ValidationError(path + ": truncated header");
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

// Class templates place glyphs (oriented bars and blob shapes) at four
// quadrant sites. The first half of the classes draws the bar family with
// one site left empty per class, the second half does the same with the
// blob family, so each class pair in a family differs by the presence of
// exactly one glyph. Layout alone carries no class information.

double glyph_pixel(int glyph, double u, double v, int size) {
  const double bar_half_len = 0.16 * size;
  const double bar_width = 0.055 * size;
  switch (glyph & 7) {
    case 0:
    case 1:
    case 2:
    case 3: {  // bars at 0, 45, 90, 135 degrees
      const double theta = 3.141592653589793 * (glyph & 3) / 4.0;
      const double along = std::cos(theta) * u + std::sin(theta) * v;
      const double across = -std::sin(theta) * u + std::cos(theta) * v;
      if (std::abs(along) > bar_half_len) return 0.0;
      return std::exp(-(across * across) / (2.0 * bar_width * bar_width));
    }
    case 4: {  // small blob
      const double s = 0.055 * size;
      return std::exp(-(u * u + v * v) / (2.0 * s * s));
    }
    case 5: {  // wide blob
      const double s = 0.115 * size;
      return std::exp(-(u * u + v * v) / (2.0 * s * s));
    }
    case 6: {  // dot pair along x
      const double s = 0.05 * size, off = 0.12 * size;
      return std::max(std::exp(-((u - off) * (u - off) + v * v) / (2.0 * s * s)),
                      std::exp(-((u + off) * (u + off) + v * v) / (2.0 * s * s)));
    }
    default: {  // dot pair along y
      const double s = 0.05 * size, off = 0.12 * size;
      return std::max(std::exp(-(u * u + (v - off) * (v - off)) / (2.0 * s * s)),
                      std::exp(-(u * u + (v + off) * (v + off)) / (2.0 * s * s)));
    }
  }
}

float template_pixel(int cls, int classes, int row, int col, int size) {
  const double quarter = size / 4.0;
  const double site_row[4] = {quarter, quarter, 3 * quarter, 3 * quarter};
  const double site_col[4] = {quarter, 3 * quarter, quarter, 3 * quarter};

  // family 0: glyphs 0..3 (bars), family 1: glyphs 4..7 (blobs); within a
  // family, class f*half is fully drawn and class f*half+s+1 leaves site s
  // empty. Extra classes beyond 2*(sites+1) rotate the glyph assignment.
  const int half = (classes + 1) / 2;
  const int family = cls < half ? 0 : 1;
  const int variant = family == 0 ? cls : cls - half;
  const int empty_site = variant - 1;  // -1 means all sites drawn
  const int rotation = variant > 4 ? variant - 4 : 0;

  double value = 0.0;
  for (int site = 0; site < 4; ++site) {
    if (site == empty_site) continue;
    const int glyph = 4 * family + ((site + rotation) & 3);
    const double u = col - site_col[site], v = row - site_row[site];
    value = std::max(value, glyph_pixel(glyph, u, v, size));
  }
  return static_cast<float>(value);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img_bytes = read_file(images_path);
  const auto lbl_bytes = read_file(labels_path);

  const std::uint32_t img_magic = read_be32(img_bytes, 0, images_path);
  if (img_magic != kImagesMagic)
    throw ValidationError(images_path + ": bad IDX magic (expected 0x00000803)");
  const std::int64_t n = read_be32(img_bytes, 4, images_path);
  const std::int64_t h = read_be32(img_bytes, 8, images_path);
  const std::int64_t w = read_be32(img_bytes, 12, images_path);
  if (n < 1 || h < 1 || w < 1) throw ValidationError(images_path + ": degenerate dimensions");
  const std::size_t pixel_count = static_cast<std::size_t>(n * h * w);
  if (img_bytes.size() != 16 + pixel_count)
    throw ValidationError(images_path + ": payload size does not match header (" +
                          std::to_string(img_bytes.size() - 16) + " bytes for " +
                          std::to_string(pixel_count) + " pixels)");

  const std::uint32_t lbl_magic = read_be32(lbl_bytes, 0, labels_path);
  if (lbl_magic != kLabelsMagic)
    throw ValidationError(labels_path + ": bad IDX magic (expected 0x00000801)");
  const std::int64_t ln = read_be32(lbl_bytes, 4, labels_path);
  if (ln != n)
    throw ValidationError("image/label count mismatch: " + std::to_string(n) + " images vs " +
                          std::to_string(ln) + " labels");
  if (lbl_bytes.size() != 8 + static_cast<std::size_t>(ln))
    throw ValidationError(labels_path + ": payload size does not match header");

  Dataset data;
  data.images = Tensor({n, 1, h, w});
  for (std::size_t i = 0; i < pixel_count; ++i)
    data.images.data[i] = static_cast<float>(img_bytes[16 + i]) / 255.f;
  data.labels.resize(static_cast<std::size_t>(n));
  int max_label = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    data.labels[static_cast<std::size_t>(i)] = lbl_bytes[8 + static_cast<std::size_t>(i)];
    max_label = std::max(max_label, data.labels[static_cast<std::size_t>(i)]);
  }
  data.class_count = max_label + 1;
  return data;
}

void write_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path) {
  if (data.images.rank() != 4 || data.images.dim(1) != 1)
    throw ValidationError("write_idx: only [N,1,H,W] datasets are supported");
  const std::int64_t n = data.images.dim(0), h = data.images.dim(2), w = data.images.dim(3);

  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw RuntimeError("cannot write " + images_path);
  write_be32(img, kImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(n));
  write_be32(img, static_cast<std::uint32_t>(h));
  write_be32(img, static_cast<std::uint32_t>(w));
  for (float v : data.images.data) {
    const float clamped = std::clamp(v, 0.f, 1.f);
    const unsigned char byte = static_cast<unsigned char>(std::lround(clamped * 255.f));
    img.write(reinterpret_cast<const char*>(&byte), 1);
  }
  if (!img) throw RuntimeError("write failed: " + images_path);

  std::ofstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw RuntimeError("cannot write " + labels_path);
  write_be32(lbl, kLabelsMagic);
  write_be32(lbl, static_cast<std::uint32_t>(n));
  for (int label : data.labels) {
    if (label < 0 || label > 255) throw ValidationError("write_idx: label out of byte range");
    const unsigned char byte = static_cast<unsigned char>(label);
    lbl.write(reinterpret_cast<const char*>(&byte), 1);
  }
  if (!lbl) throw RuntimeError("write failed: " + labels_path);
}

Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2) throw ValidationError("synth: need at least 2 classes");
  if (spec.per_class < 1) throw ValidationError("synth: per_class must be >= 1");
  if (spec.image_size < 4) throw ValidationError("synth: image_size must be >= 4");
  if (spec.noise < 0) throw ValidationError("synth: noise must be >= 0");

  const int size = spec.image_size;
  const std::int64_t n = static_cast<std::int64_t>(spec.classes) * spec.per_class;

  // Templates once per class, then per-sample noise from one stream
  // (samples interleaved over classes, pixels row-major).
  std::vector<std::vector<float>> templates(static_cast<std::size_t>(spec.classes));
  for (int cls = 0; cls < spec.classes; ++cls) {
    auto& t = templates[static_cast<std::size_t>(cls)];
    t.resize(static_cast<std::size_t>(size) * size);
    for (int row = 0; row < size; ++row)
      for (int col = 0; col < size; ++col)
        t[static_cast<std::size_t>(row * size + col)] =
            template_pixel(cls, spec.classes, row, col, size);
  }

  Dataset data;
  data.class_count = spec.classes;
  data.images = Tensor({n, 1, size, size});
  data.labels.resize(static_cast<std::size_t>(n));
  Rng rng(seed);
  std::int64_t cursor = 0;
  for (int rep = 0; rep < spec.per_class; ++rep)
    for (int cls = 0; cls < spec.classes; ++cls) {
      data.labels[static_cast<std::size_t>(cursor)] = cls;
      float* pixels = data.images.data.data() + cursor * size * size;
      const auto& t = templates[static_cast<std::size_t>(cls)];
      for (int p = 0; p < size * size; ++p)
        pixels[p] = t[static_cast<std::size_t>(p)] +
                    static_cast<float>(spec.noise * rng.next_gaussian());
      ++cursor;
    }
  return data;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double test_fraction) {
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw ValidationError("split: test_fraction must be in [0, 1)");

  std::vector<std::vector<std::int64_t>> by_class(static_cast<std::size_t>(data.class_count));
  for (std::int64_t i = 0; i < data.count(); ++i)
    by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);

  std::vector<std::int64_t> train_idx, test_idx;
  for (const auto& members : by_class) {
    const std::int64_t k =
        std::llround(test_fraction * static_cast<double>(members.size()));
    const std::size_t cut = members.size() - static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < members.size(); ++i)
      (i < cut ? train_idx : test_idx).push_back(members[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {gather(data, train_idx), gather(data, test_idx)};
}

Dataset normalize(const Dataset& data, float mean, float std) {
  if (!(std > 0.f)) throw ValidationError("normalize: std must be > 0");
  Dataset out;
  out.class_count = data.class_count;
  out.labels = data.labels;
  out.images = data.images;
  for (float& v : out.images.data) v = (v - mean) / std;
  return out;
}

Dataset gather(const Dataset& data, std::span<const std::int64_t> indices) {
  if (indices.empty()) throw ValidationError("gather: empty index set");
  const std::int64_t c = data.images.dim(1), h = data.images.dim(2), w = data.images.dim(3);
  const std::int64_t pixels = c * h * w;
  Dataset out;
  out.class_count = data.class_count;
  out.images = Tensor({static_cast<std::int64_t>(indices.size()), c, h, w});
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::int64_t src = indices[i];
    if (src < 0 || src >= data.count()) throw ValidationError("gather: index out of range");
    std::copy_n(data.images.data.begin() + src * pixels, pixels,
                out.images.data.begin() + static_cast<std::int64_t>(i) * pixels);
    out.labels[i] = data.labels[static_cast<std::size_t>(src)];
  }
  return out;
}

std::vector<double> class_frequencies(const Dataset& data) {
  std::vector<double> freq(static_cast<std::size_t>(data.class_count), 0.0);
  for (int label : data.labels) freq[static_cast<std::size_t>(label)] += 1.0;
  for (double& f : freq) f /= static_cast<double>(data.labels.size());
  return freq;
}

}  // namespace ablate
