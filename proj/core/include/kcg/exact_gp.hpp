#pragma once

#include "kcg/kernels.hpp"
#include "kcg/linalg.hpp"

namespace kcg {

/// The two data-dependent pieces of the Gaussian log evidence:
/// log p(y) = -quadratic / 2 - logdet / 2 - N / 2 log(2 pi).
struct EvidenceTerms {
  double quadratic = 0.0;  ///< y^T (K + s2 I)^{-1} y
  double logdet = 0.0;     ///< log |K + s2 I|
  Index n = 0;

  double log_evidence() const;
};

/// Gaussian-process regression by a full Cholesky factorization of K + s2 I.
/// The reference every approximation in this library is measured against.
class ExactGp {
 public:
  /// Throws InvalidArgument for N = 0 or noise <= 0, DimensionMismatch for
  /// shape errors and NotPositiveDefinite if the jitter ladder is exhausted.
  static ExactGp fit(const Kernel& kernel, Points x, Vector y, double noise,
                     const JitterPolicy& jitter = {});

  const Kernel& kernel() const noexcept { return kernel_; }
  const Points& inputs() const noexcept { return x_; }
  const Vector& targets() const noexcept { return y_; }
  double noise() const noexcept { return noise_; }
  const CholeskyFactor& factor() const noexcept { return factor_; }
  /// (K + s2 I)^{-1} y.
  const Vector& weights() const noexcept { return alpha_; }

  Vector predict_mean(const Points& x_star) const;
  /// k(X*, X**) - k*^T (K + s2 I)^{-1} k**.
  Matrix predict_cov(const Points& x_star, const Points& x_star2) const;
  /// Diagonal of predict_cov(x_star, x_star) without forming the full matrix.
  Vector predict_var(const Points& x_star) const;
  EvidenceTerms evidence_terms() const;
  double log_evidence() const;

 private:
  ExactGp(Kernel kernel, Points x, Vector y, double noise, CholeskyFactor factor, Vector alpha)
      : kernel_(std::move(kernel)), x_(std::move(x)), y_(std::move(y)), noise_(noise),
        factor_(std::move(factor)), alpha_(std::move(alpha)) {}

  Kernel kernel_;
  Points x_;
  Vector y_;
  double noise_;
  CholeskyFactor factor_;
  Vector alpha_;
};

}  // namespace kcg
