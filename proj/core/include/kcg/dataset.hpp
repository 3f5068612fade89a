#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "kcg/kernels.hpp"
#include "kcg/linalg.hpp"

namespace kcg {

struct GridSpec;
struct MaskedToeplitzSpec;

/// A regression problem: training and test inputs with targets.
struct Dataset {
  std::string name;
  Points x;
  Vector y;
  Points x_test;
  Vector y_test;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> metadata;
  /// Set when the training inputs form a Cartesian grid (row order matches the grid).
  std::shared_ptr<const GridSpec> grid;
  /// Set when the training inputs are the observed subset of an equispaced series.
  std::shared_ptr<const MaskedToeplitzSpec> series;

  Index size() const noexcept { return x.rows(); }
  Index test_size() const noexcept { return x_test.rows(); }
  Index dim() const noexcept { return x.cols(); }
  /// Throws InvalidArgument on shape mismatches or non-finite entries.
  void validate() const;
};

}  // namespace kcg
