#pragma once

#include <stdexcept>
#include <string>

namespace native {

// Error taxonomy. The CLI maps each family onto a stable exit code.

// Bad or inconsistent configuration (exit 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset or checkpoint on disk, vocabulary mismatch (exit 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during a forward or backward pass (exit 4).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes that do not conform for an op. Programmer error, but
// reported with the op name and offending shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace native
