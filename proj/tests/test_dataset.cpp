#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <vector>

#include "ablate/dataset.hpp"
#include "ablate/error.hpp"
#include "helpers.hpp"

using namespace ablate;
using test_helpers::TempDir;

namespace {

void write_raw(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void push_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

std::vector<unsigned char> idx_images(std::uint32_t n, std::uint32_t h, std::uint32_t w,
                                      const std::vector<unsigned char>& pixels) {
  std::vector<unsigned char> bytes;
  push_be32(bytes, 0x00000803);
  push_be32(bytes, n);
  push_be32(bytes, h);
  push_be32(bytes, w);
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  return bytes;
}

std::vector<unsigned char> idx_labels(std::uint32_t n, const std::vector<unsigned char>& labels) {
  std::vector<unsigned char> bytes;
  push_be32(bytes, 0x00000801);
  push_be32(bytes, n);
  bytes.insert(bytes.end(), labels.begin(), labels.end());
  return bytes;
}

}  // namespace

TEST_CASE("idx loader scales bytes to [0,1]") {
  TempDir dir("idx_scale");
  write_raw(dir.file("img.idx"), idx_images(1, 2, 2, {0, 255, 0, 255}));
  write_raw(dir.file("lbl.idx"), idx_labels(1, {3}));
  const Dataset data = load_idx(dir.file("img.idx"), dir.file("lbl.idx"));
  CHECK(data.images.shape == std::vector<std::int64_t>{1, 1, 2, 2});
  CHECK(data.images.data == std::vector<float>{0.f, 1.f, 0.f, 1.f});
  CHECK(data.labels == std::vector<int>{3});
  CHECK(data.class_count == 4);
}

TEST_CASE("idx loader rejects malformed files") {
  TempDir dir("idx_bad");
  SUBCASE("count mismatch") {
    write_raw(dir.file("img.idx"), idx_images(2, 2, 2, std::vector<unsigned char>(8, 7)));
    write_raw(dir.file("lbl.idx"), idx_labels(3, {0, 1, 2}));
    CHECK_THROWS_AS(load_idx(dir.file("img.idx"), dir.file("lbl.idx")), ValidationError);
  }
  SUBCASE("bad magic") {
    auto bytes = idx_images(1, 2, 2, std::vector<unsigned char>(4, 7));
    bytes[3] = 0x99;
    write_raw(dir.file("img.idx"), bytes);
    write_raw(dir.file("lbl.idx"), idx_labels(1, {0}));
    CHECK_THROWS_AS(load_idx(dir.file("img.idx"), dir.file("lbl.idx")), ValidationError);
  }
  SUBCASE("truncated payload") {
    auto bytes = idx_images(2, 2, 2, std::vector<unsigned char>(8, 7));
    bytes.resize(bytes.size() - 3);
    write_raw(dir.file("img.idx"), bytes);
    write_raw(dir.file("lbl.idx"), idx_labels(2, {0, 1}));
    CHECK_THROWS_AS(load_idx(dir.file("img.idx"), dir.file("lbl.idx")), ValidationError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx(dir.file("absent.idx"), dir.file("alsoabsent.idx")), ValidationError);
  }
}

TEST_CASE("idx write-then-read round trip") {
  // byte-representable pixel values survive exactly
  Dataset data;
  data.class_count = 3;
  data.labels = {0, 2, 1, 2};
  data.images = Tensor({4, 1, 3, 3});
  for (std::int64_t i = 0; i < data.images.size(); ++i)
    data.images[i] = static_cast<float>((i * 7) % 256) / 255.f;

  TempDir dir("idx_roundtrip");
  write_idx(data, dir.file("img.idx"), dir.file("lbl.idx"));
  const Dataset back = load_idx(dir.file("img.idx"), dir.file("lbl.idx"));
  CHECK(back.images.shape == data.images.shape);
  CHECK(back.images.data == data.images.data);
  CHECK(back.labels == data.labels);
}

TEST_CASE("synthetic dataset is a pure function of spec and seed") {
  SynthSpec spec;
  spec.classes = 6;
  spec.per_class = 10;
  spec.image_size = 12;
  spec.noise = 0.15;
  const Dataset a = synth_dataset(spec, 99);
  const Dataset b = synth_dataset(spec, 99);
  CHECK(a.images.data == b.images.data);
  CHECK(a.labels == b.labels);
  const Dataset c = synth_dataset(spec, 100);
  CHECK(a.images.data != c.images.data);
  CHECK(a.count() == 60);
  CHECK(a.class_count == 6);
}

TEST_CASE("synthetic dataset with zero noise repeats the class template") {
  SynthSpec spec;
  spec.classes = 4;
  spec.per_class = 3;
  spec.image_size = 8;
  spec.noise = 0.0;
  const Dataset data = synth_dataset(spec, 1);
  // samples are interleaved c0..c3, c0..c3, ...
  const std::int64_t pixels = 64;
  for (int cls = 0; cls < 4; ++cls) {
    const float* first = data.images.data.data() + cls * pixels;
    for (int rep = 1; rep < 3; ++rep) {
      const float* other = data.images.data.data() + (rep * 4 + cls) * pixels;
      for (std::int64_t p = 0; p < pixels; ++p) CHECK(first[p] == other[p]);
    }
  }
  CHECK_THROWS_AS(synth_dataset(SynthSpec{1, 5, 8, 0.0, 0.2}, 1), ValidationError);
}

TEST_CASE("split_train_test keeps classes balanced and is deterministic") {
  SynthSpec spec;
  spec.classes = 5;
  spec.per_class = 20;
  spec.image_size = 8;
  const Dataset data = synth_dataset(spec, 3);
  const auto [train, test] = split_train_test(data, 0.2);
  CHECK(train.count() == 80);
  CHECK(test.count() == 20);
  std::vector<int> test_counts(5, 0);
  for (int label : test.labels) ++test_counts[static_cast<std::size_t>(label)];
  for (int count : test_counts) CHECK(count == 4);

  const auto [train2, test2] = split_train_test(data, 0.2);
  CHECK(test2.images.data == test.images.data);
  CHECK_THROWS_AS(split_train_test(data, 1.0), ValidationError);
}

TEST_CASE("normalize") {
  Dataset data;
  data.class_count = 2;
  data.labels = {0, 1};
  data.images = Tensor({2, 1, 2, 2}, {0.f, 0.5f, 1.f, 0.25f, 0.75f, 0.f, 1.f, 0.5f});

  SUBCASE("identity at mean 0 std 1") {
    const Dataset out = normalize(data, 0.f, 1.f);
    CHECK(out.images.data == data.images.data);
  }
  SUBCASE("constant image at its own mean maps to zeros") {
    Dataset flat;
    flat.class_count = 1;
    flat.labels = {0};
    flat.images = Tensor({1, 1, 2, 2}, std::vector<float>(4, 0.6f));
    const Dataset out = normalize(flat, 0.6f, 2.f);
    for (float v : out.images.data) CHECK(v == 0.f);
  }
  SUBCASE("matches the scalar formula") {
    const Dataset out = normalize(data, 0.5f, 0.25f);
    for (std::int64_t i = 0; i < data.images.size(); ++i)
      CHECK(out.images[i] == (data.images[i] - 0.5f) / 0.25f);
  }
  SUBCASE("non-positive std rejected") {
    CHECK_THROWS_AS(normalize(data, 0.f, 0.f), ValidationError);
    CHECK_THROWS_AS(normalize(data, 0.f, -1.f), ValidationError);
  }
}

TEST_CASE("gather and class frequencies") {
  SynthSpec spec;
  spec.classes = 3;
  spec.per_class = 4;
  spec.image_size = 6;
  const Dataset data = synth_dataset(spec, 5);
  const std::vector<std::int64_t> indices{0, 1, 2, 3, 4, 5};
  const Dataset sub = gather(data, indices);
  CHECK(sub.count() == 6);
  CHECK(sub.labels == std::vector<int>{0, 1, 2, 0, 1, 2});
  const auto freq = class_frequencies(sub);
  for (double f : freq) CHECK(f == doctest::Approx(1.0 / 3).epsilon(1e-12));
  const std::vector<std::int64_t> bad{99};
  CHECK_THROWS_AS(gather(data, bad), ValidationError);
}
