#pragma once

#include <stdexcept>
#include <string>

namespace ablate {

// Bad inputs: shapes that do not compose, malformed files, out-of-range
// arguments. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures while running: non-finite loss, I/O errors. Exit code 3.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ablate
