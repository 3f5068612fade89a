#pragma once

// Finite-rank kernels k^(x, z) = phi(x)^T Sigma^{-1} phi(z) and the regression
// models built on them, plus the FITC and VFE inducing-point baselines.

#include <functional>
#include <optional>

#include "kcg/exact_gp.hpp"
#include "kcg/kernels.hpp"
#include "kcg/linalg.hpp"

namespace kcg {

/// Evaluates M features at n points, returning the M x n matrix [phi_i(x_j)].
using FeatureFn = std::function<Matrix(const Points&)>;
/// Evaluates a bivariate function on two point sets, returning the n x m matrix [f(a_i, b_j)].
using BivariateFn = std::function<Matrix(const Points&, const Points&)>;

class FeatureExpansion {
 public:
  /// Throws InvalidArgument for an empty feature function, DimensionMismatch
  /// for a non-square inner matrix and NotPositiveDefinite if it cannot be factorized.
  FeatureExpansion(FeatureFn features, Matrix inner, const JitterPolicy& jitter = {});

  Index rank() const noexcept { return inner_.rows(); }
  Matrix features(const Points& x) const;
  const Matrix& inner() const noexcept { return inner_; }
  const CholeskyFactor& inner_factor() const noexcept { return inner_factor_; }

  /// phi(X)^T Sigma^{-1} phi(Z); exactly symmetric when x and z are the same object.
  Matrix approx_gram(const Points& x, const Points& z) const;

 private:
  FeatureFn features_;
  Matrix inner_;
  CholeskyFactor inner_factor_;
};

/// phi(x) = k(X_U, x), Sigma = k(X_U, X_U): the subset-of-regressors kernel.
FeatureExpansion sor_expansion(const Kernel& kernel, const Points& x_u, const JitterPolicy& jitter = {});

enum class VarianceMode {
  Plain,        ///< s2 phi*^T (Phi Phi^T + s2 Sigma)^{-1} phi**
  Dtc,          ///< k - phi*^T Sigma^{-1} phi** + Plain
  DtcAsPrinted  ///< k - phi*^T Sigma^{-1} phi** + s2 phi*^T (Phi Phi^T + s2 I)^{-1} phi**
};

class LowRankModel {
 public:
  /// `prior` is the exact kernel, required only for the DTC variance modes.
  static LowRankModel fit(FeatureExpansion expansion, const Points& x, Vector y, double noise,
                          std::optional<Kernel> prior = std::nullopt, const JitterPolicy& jitter = {});

  const FeatureExpansion& expansion() const noexcept { return expansion_; }
  const Matrix& design() const noexcept { return phi_; }
  double noise() const noexcept { return noise_; }

  /// phi(x*)^T (Phi Phi^T + s2 Sigma)^{-1} Phi y
  Vector mean(const Points& x_star) const;
  Matrix cov(const Points& x_star, const Points& x_star2, VarianceMode mode = VarianceMode::Plain) const;
  Vector var(const Points& x_star, VarianceMode mode = VarianceMode::Plain) const;
  /// Terms of log N(y; 0, Phi^T Sigma^{-1} Phi + s2 I) by the inversion and determinant lemmas.
  EvidenceTerms evidence_terms() const;
  double log_evidence() const { return evidence_terms().log_evidence(); }

 private:
  LowRankModel(FeatureExpansion expansion, Matrix phi, Vector y, double noise, std::optional<Kernel> prior,
               CholeskyFactor factor, Vector beta)
      : expansion_(std::move(expansion)), phi_(std::move(phi)), y_(std::move(y)), noise_(noise),
        prior_(std::move(prior)), factor_(std::move(factor)), beta_(std::move(beta)) {}

  const Kernel& prior_kernel() const;

  FeatureExpansion expansion_;
  Matrix phi_;  // M x N
  Vector y_;
  double noise_;
  std::optional<Kernel> prior_;
  CholeskyFactor factor_;  // Phi Phi^T + s2 Sigma
  Vector beta_;            // (Phi Phi^T + s2 Sigma)^{-1} Phi y
};

/// Posterior over the kernel itself given the projections Y = S^T k(X_U, X_U) S,
/// under a Gaussian prior with mean mu0 and symmetric-Kronecker covariance built from w.
/// With G = S (S^T W_M S)^{-1} S^T and W_M = w(X_U, X_U):
///   mean(a, b) = mu0(a, b) + w(a, X_U) G (K_M - mu0(X_U, X_U)) G w(X_U, b)
///   var(a, b; c, d) = (w_ac w_bd + w_ad w_bc) / 2
///                     - (w_a G w_c)(w_b G w_d) / 2 - (w_a G w_d)(w_b G w_c) / 2
class GeneralInducingPosterior {
 public:
  /// `mu0` may be empty for the zero prior mean. `truth` is the kernel whose
  /// projections are observed. Throws NotPositiveDefinite if S^T W_M S is singular.
  GeneralInducingPosterior(Kernel w, BivariateFn mu0, const Kernel& truth, Points x_u, Matrix s);

  Matrix mean(const Points& a, const Points& b) const;
  double variance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                  const Eigen::Ref<const Vector>& c, const Eigen::Ref<const Vector>& d) const;
  /// G = S (S^T W_M S)^{-1} S^T.
  const Matrix& projector() const noexcept { return g_; }

 private:
  double w_g_w(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const;

  Kernel w_;
  BivariateFn mu0_;
  Points x_u_;
  Matrix g_;
  Matrix centre_;  // G (K_M - mu0(X_U, X_U)) G
};

/// Draws n points from the base density.
using PointSampler = std::function<Points(Index, Rng&)>;

/// Eigenfunctions phi_i of a kernel, orthonormal under a base density nu, with their eigenvalues.
class EigenExpansion {
 public:
  /// Throws InvalidArgument unless the eigenvalues are positive, finite and
  /// sorted in descending order.
  EigenExpansion(FeatureFn eigenfunctions, Vector eigenvalues, PointSampler base);

  /// As the constructor, and additionally rejects expansions whose Monte-Carlo
  /// orthonormality defect over `draws` samples exceeds `tolerance`.
  static EigenExpansion verified(FeatureFn eigenfunctions, Vector eigenvalues, PointSampler base, Rng& rng,
                                 Index draws = 100000, double tolerance = 5e-2);

  Index size() const noexcept { return lambda_.size(); }
  const Vector& eigenvalues() const noexcept { return lambda_; }
  Matrix eigenfunctions(const Points& x) const;
  /// max |E_nu[phi_i phi_j] - delta_ij| estimated from `draws` samples.
  double orthonormality_defect(Rng& rng, Index draws) const;
  /// The leading `p` eigenpairs.
  EigenExpansion truncated(Index p) const;
  /// FeatureExpansion with Sigma = diag(lambda)^{-1}, so k^ = phi^T diag(lambda) phi.
  FeatureExpansion as_features() const;

 private:
  FeatureFn phi_;
  Vector lambda_;
  PointSampler base_;
};

/// phi(x*)^T (Phi Phi^T + s2 diag(lambda)^{-1})^{-1} Phi y.
Vector pbr_predict(const EigenExpansion& expansion, const Points& x, const Vector& y, double noise,
                   const Points& x_star);

/// Leading `count` eigenpairs of a squared-exponential kernel under the
/// product Gaussian density N(centre, diag(sd^2)), ordered by eigenvalue.
/// Throws InvalidArgument for a Matern kernel.
EigenExpansion se_hermite_expansion(const Kernel& kernel, const Vector& centre, const Vector& sd, Index count);

struct InducingPrediction {
  Vector mean;
  Vector var;  ///< latent predictive variance, without the noise term
  EvidenceTerms evidence;
  double log_evidence = 0.0;
};

/// FITC: prior covariance Q + diag(K - Q) + s2 I with Q = K_fu K_uu^{-1} K_uf.
InducingPrediction fitc_predict(const Kernel& kernel, const Points& x, const Vector& y, double noise,
                                const Points& x_u, const Points& x_star, const JitterPolicy& jitter = {});

/// VFE: DTC predictions; evidence is the DTC evidence minus tr(K - Q) / (2 s2).
InducingPrediction vfe_predict(const Kernel& kernel, const Points& x, const Vector& y, double noise,
                               const Points& x_u, const Points& x_star, const JitterPolicy& jitter = {});

}  // namespace kcg
