#pragma once

// Fast Gram-matrix products for structured inputs: Kronecker products on
// Cartesian grids and Toeplitz matrices on equispaced series.

#include <complex>
#include <cstdint>
#include <vector>

#include "kcg/dataset.hpp"
#include "kcg/kernels.hpp"
#include "kcg/linalg.hpp"
#include "kcg/solvers.hpp"

namespace kcg {

/// A Cartesian product grid with one Gram factor per axis. Grid points are
/// ordered with axis 0 most significant, so K = K_0 (x) K_1 (x) ... (x) K_{D-1}.
struct GridSpec {
  std::vector<Vector> axes;
  std::vector<Matrix> factors;

  /// Factors k_d(axis_d, axis_d) of a product kernel; the amplitude goes on axis 0.
  /// Throws InvalidArgument for kernels that do not factorize over dimensions (Matern).
  static GridSpec from_kernel(const Kernel& kernel, std::vector<Vector> axes);

  Index dims() const noexcept { return static_cast<Index>(axes.size()); }
  Index size() const;
  /// All grid points, one per row, in Kronecker order.
  Points points() const;
  /// Throws InvalidArgument unless every factor is square, matches its axis and is symmetric.
  void validate() const;
};

/// (F_0 (x) ... (x) F_{D-1}) v by D mode products. Factors may be any square matrices.
Vector kron_mvm(const std::vector<Matrix>& factors, const Vector& v);
Vector kron_mvm(const GridSpec& spec, const Vector& v);
/// The operator holds a shared copy of the grid.
MvmOperator kron_operator(const GridSpec& spec);

/// In-place radix-2 FFT; the length must be a power of two. The inverse includes the 1/n factor.
void fft(std::vector<std::complex<double>>& a, bool inverse);

/// Symmetric Toeplitz matrix given by its first row, multiplied through a
/// power-of-two circulant embedding whose spectrum is computed once.
class ToeplitzOperator {
 public:
  explicit ToeplitzOperator(const Vector& first_row);
  Index size() const noexcept { return n_; }
  Vector apply(const Vector& v) const;

 private:
  Index n_;
  std::vector<std::complex<double>> spectrum_;
};

/// T v for the symmetric Toeplitz T with the given first row.
Vector toeplitz_mvm(const Vector& first_row, const Vector& v);

/// Gram over the observed subset of an equispaced series of length T.
struct MaskedToeplitzSpec {
  Index length = 0;
  Vector first_row;
  std::vector<Index> mask;  ///< observed positions, strictly increasing in [0, length)

  static MaskedToeplitzSpec from_kernel(const Kernel& kernel, Index length, double spacing, std::vector<Index> mask);
  Index observed() const noexcept { return static_cast<Index>(mask.size()); }
  /// Throws InvalidArgument on a malformed mask or non-finite row.
  void validate() const;
};

/// Scatter into the full series, multiply by the Toeplitz Gram, gather the observed entries.
Vector masked_mvm(const MaskedToeplitzSpec& spec, const Vector& v);
/// Operator form with the circulant spectrum cached.
MvmOperator masked_toeplitz_operator(const MaskedToeplitzSpec& spec);

struct GridOptions {
  double axis_noise_sd = 0.031622776601683794;  ///< sqrt(1e-3)
  Index test_points = 100;
  Index max_points = Index{1} << 22;
  /// Relative diagonal shift used when conditioning the test targets on the grid draw.
  double conditioning_jitter = 1e-10;
};

/// Grid of G points per axis over [-G/4, G/4]^D with per-coordinate Gaussian
/// perturbation, targets drawn from the zero-mean GP through per-axis
/// Cholesky factors, and uniform test inputs whose targets are drawn from the
/// GP conditioned on the grid draw. Throws InvalidArgument if G^D exceeds max_points.
Dataset grid_dataset(Index g, Index d, const Kernel& kernel, std::uint64_t seed, const GridOptions& options = {});

}  // namespace kcg
