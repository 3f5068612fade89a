#pragma once

// Kernel machine conjugate gradients: the kernel is inferred from the search
// directions of CG on k(X_M, X_M) a = y_M, giving a rank-P kernel
//   k^(x, z) = k(x, X_M) S (S^T K_M S)^{-1} S^T k(X_M, z)
// with closed-form regression mean, covariance and evidence.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "kcg/exact_gp.hpp"
#include "kcg/kernels.hpp"
#include "kcg/linalg.hpp"
#include "kcg/lowrank.hpp"
#include "kcg/solvers.hpp"

namespace kcg {

/// Gaussian prior over kernels: mean mu0, covariance alpha * (w (x)s w).
/// The closed forms below need mu0 = 0 and w = k; other choices are served
/// by GeneralInducingPosterior.
struct KernelPriorConfig {
  BivariateFn mean;                ///< empty means the zero function
  std::optional<Kernel> generator; ///< empty means w = k
  double scale = 1.0;              ///< alpha

  /// Throws InvalidArgument unless scale > 0.
  void validate() const;
  bool is_standard() const noexcept { return !mean && !generator; }
};

struct KmcgOptions {
  Index inducing = -1;                    ///< M; negative means M = N
  std::optional<std::vector<Index>> subset; ///< explicit X_M indices, overriding `inducing` and `seed`
  CgOptions cg;                           ///< residual threshold defaults to 0.01 |y_M|
  std::uint64_t seed = 0;                 ///< draws X_M when M < N
  KernelPriorConfig prior;
  /// Leading directions are kept while each Cholesky pivot exceeds this
  /// fraction of its diagonal entry.
  double truncation_ratio = 1e-13;
  /// Replaces the dense K_M inside CG (must act on the X_M ordering, no noise term).
  std::shared_ptr<const MvmOperator> k_m_operator;
  /// Rows of k(X, X_M) evaluated at a time while forming R.
  Index block_rows = 512;
};

/// The CG part of a fit, reusable for every prefix length.
struct KmcgRun {
  std::vector<Index> subset;
  CgTrace trace;
  /// k(X, X_M) S for every trace direction; shared with the products when M = N.
  std::shared_ptr<const Matrix> r;
  std::shared_ptr<const Matrix> z;
};

/// Selects X_M, runs reorthogonalized CG on (K_M, y_M) from zero and forms R.
KmcgRun kmcg_run_cg(const Kernel& kernel, const Points& x, const Vector& y, const KmcgOptions& options = {});

class KmcgModel {
 public:
  /// Builds the model from the first `steps` directions of a run, applying
  /// Cholesky truncation. Throws InvalidArgument for noise <= 0 or steps out of range.
  static KmcgModel from_run(const Kernel& kernel, const Points& x, const Vector& y, double noise,
                            const KmcgRun& run, Index steps, const KmcgOptions& options = {});

  const Kernel& kernel() const noexcept { return kernel_; }
  const std::vector<Index>& subset() const noexcept { return subset_; }
  const Points& inducing_points() const noexcept { return x_m_; }
  Index inducing_count() const noexcept { return x_m_.rows(); }
  /// Effective number of directions after truncation.
  Index steps() const noexcept { return s_.cols(); }
  Index requested_steps() const noexcept { return requested_; }
  CgTermination reason() const noexcept { return reason_; }
  double noise() const noexcept { return noise_; }
  double prior_scale() const noexcept { return alpha_; }
  const Matrix& directions() const noexcept { return s_; }
  const Matrix& products() const noexcept { return *z_; }
  const Matrix& projections() const noexcept { return *r_; }
  /// True when R and Z are the same matrix object (M = N).
  bool shares_products() const noexcept { return z_ == r_; }
  const Matrix& l1() const noexcept { return l1_; }
  const Matrix& l2() const noexcept { return l2_; }

  double kernel_eval(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z) const;
  /// Gram of k^; exactly symmetric when a and b are the same object.
  Matrix kernel_gram(const Points& a, const Points& b) const;

  Vector mean(const Points& x_star) const;
  Matrix cov(const Points& x_star, const Points& x_star2) const;
  Vector var(const Points& x_star) const;
  /// quadratic = (y^T y - y^T R (.)^{-1} R^T y) / s2,
  /// logdet = log|s2 S^T Z + R^T R| - log|S^T Z| + (N - P) log s2.
  EvidenceTerms evidence_terms() const;
  double log_evidence() const { return evidence_terms().log_evidence(); }

  /// alpha (k_xx k_zz + k_xz^2 - k^_xx k^_zz - k^_xz^2) / 2
  double uncertainty(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z) const;
  /// (k_true - k^(x, z))^2 / uncertainty(x, z); 0 when the error vanishes to
  /// rounding, infinity when only the uncertainty does.
  double error_bound_ratio(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z,
                           double k_true) const;
  /// k^(Xs, Xs) plus sqrt(alpha) times a draw with covariance W (x)s W - W_M (x)s W_M,
  /// W = k(Xs, Xs), W_M = k^(Xs, Xs).
  Matrix sample(const Points& x_s, Rng& rng) const;

 private:
  KmcgModel() = default;
  Matrix cross(const Points& p) const { return gram(kernel_, x_m_, p); }

  Kernel kernel_{KernelFamily::SquaredExponential, Vector::Ones(1), 1.0};
  std::vector<Index> subset_;
  Points x_m_;
  Vector y_;
  double noise_ = 0.0;
  double alpha_ = 1.0;
  Index requested_ = 0;
  CgTermination reason_ = CgTermination::Converged;
  Matrix s_;
  std::shared_ptr<const Matrix> z_;
  std::shared_ptr<const Matrix> r_;
  Matrix l1_;
  Matrix l2_;
  Matrix t1_;           // L1^{-1} S^T, P x M
  Matrix t2_;           // L2^{-1} S^T, P x M
  Vector mean_weights_; // S (L2 L2^T)^{-1} R^T y, length M
  Vector q_;            // L2^{-1} R^T y
};

/// kmcg_run_cg followed by from_run over the whole trace.
KmcgModel kmcg_fit(const Kernel& kernel, const Points& x, const Vector& y, double noise,
                   const KmcgOptions& options = {});

inline double kmcg_kernel_eval(const KmcgModel& m, const Eigen::Ref<const Vector>& x,
                               const Eigen::Ref<const Vector>& z) {
  return m.kernel_eval(x, z);
}
inline Vector kmcg_mean(const KmcgModel& m, const Points& x_star) { return m.mean(x_star); }
inline Matrix kmcg_var(const KmcgModel& m, const Points& x_star, const Points& x_star2) {
  return m.cov(x_star, x_star2);
}
inline double kmcg_evidence(const KmcgModel& m) { return m.log_evidence(); }
inline double kmcg_uncertainty(const KmcgModel& m, const Eigen::Ref<const Vector>& x,
                               const Eigen::Ref<const Vector>& z) {
  return m.uncertainty(x, z);
}
inline double error_bound_ratio(const KmcgModel& m, const Eigen::Ref<const Vector>& x,
                                const Eigen::Ref<const Vector>& z, double k_true) {
  return m.error_bound_ratio(x, z, k_true);
}
inline Matrix kmcg_sample(const KmcgModel& m, const Points& x_s, Rng& rng) { return m.sample(x_s, rng); }

}  // namespace kcg
