#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ablate/rng.hpp"
#include "ablate/tensor.hpp"

namespace test_helpers {

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline std::string desk_manifest() {
#ifdef ABLATE_CONFIG_DIR
  return read_text(std::string(ABLATE_CONFIG_DIR) + "/desk.json");
#else
  return {};
#endif
}

// Uniform values in [lo, hi), deterministic.
inline ablate::Tensor random_tensor(std::vector<std::int64_t> shape, ablate::Rng& rng,
                                    float lo = -1.f, float hi = 1.f) {
  ablate::Tensor t(std::move(shape));
  for (auto& v : t.data) v = lo + static_cast<float>(rng.next_unit()) * (hi - lo);
  return t;
}

// Scratch directory under the current working directory, unique per tag.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::path("tmp_" + tag);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// |a - b| <= atol + rtol * max(|a|, |b|)
inline bool close(double a, double b, double rtol, double atol) {
  return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

}  // namespace test_helpers
