#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "kcg/linalg.hpp"

namespace kcg {

enum class KernelFamily { SquaredExponential, Matern52 };

std::string_view to_string(KernelFamily family);
/// Accepts "se", "se-ard", "squared-exponential", "matern52", "matern-5/2".
KernelFamily parse_kernel_family(std::string_view name);

/// Points are stored one per row: an n x D matrix.
using Points = Matrix;

/// Stationary ARD kernel with diagonal precision metric Lambda and amplitude theta_f.
/// d^2 = sum_i Lambda_i (x_i - z_i)^2;
///   SE:        theta_f exp(-d^2 / 2)
///   Matern5/2: theta_f (1 + sqrt(5) d + 5/3 d^2) exp(-sqrt(5) d)
class Kernel {
 public:
  /// Throws InvalidArgument unless every metric entry and the amplitude are positive and finite.
  Kernel(KernelFamily family, Vector metric, double amplitude);

  /// Isotropic metric broadcast to `dim` input dimensions.
  static Kernel isotropic(KernelFamily family, Index dim, double metric, double amplitude);

  KernelFamily family() const noexcept { return family_; }
  const Vector& metric() const noexcept { return metric_; }
  double amplitude() const noexcept { return amplitude_; }
  Index input_dim() const noexcept { return metric_.size(); }

  /// Kernel value as a function of the squared metric distance.
  double from_squared_distance(double d2) const;
  double squared_distance(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z) const;
  double operator()(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z) const;

  /// Same family and amplitude, metric restricted to one input dimension; the
  /// amplitude is dropped (set to 1) unless keep_amplitude.
  Kernel axis_kernel(Index axis, bool keep_amplitude) const;

 private:
  KernelFamily family_;
  Vector metric_;
  double amplitude_;
};

/// eval(kernel, x, z) with dimension checks.
double eval(const Kernel& kernel, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z);

/// Gram matrix G(i, j) = k(x_i, z_j). Throws DimensionMismatch on width mismatch.
/// When `x` and `z` are the same object the result is symmetric bit for bit.
Matrix gram(const Kernel& kernel, const Points& x, const Points& z);
/// Symmetric Gram k(X, X); only the lower triangle is evaluated and mirrored.
Matrix gram(const Kernel& kernel, const Points& x);
/// k(x_i, x_i) for every row.
Vector gram_diagonal(const Kernel& kernel, const Points& x);
/// Rows of `x` selected by `rows`.
Points select_rows(const Points& x, const std::vector<Index>& rows);

}  // namespace kcg
