#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kcg {

/// Operand shapes do not agree.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A Cholesky factorization failed, even after the jitter ladder (if any) ran out.
class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(const std::string& what, std::ptrdiff_t column)
      : std::runtime_error(what), column_(column) {}

  /// Zero-based column at which the last attempted factorization broke down.
  std::ptrdiff_t column() const noexcept { return column_; }

 private:
  std::ptrdiff_t column_;
};

/// Input that violates a documented precondition (non-positive noise, empty set, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace kcg
