#pragma once

#include <stdexcept>
#include <string>

namespace manyiv {

// Bad input: unreadable files, malformed CSV, dimension or rank violations.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Degenerate numerics: non-PD variance blocks, vanishing denominators, etc.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace manyiv
