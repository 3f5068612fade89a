#include "kcg/exact_gp.hpp"

#include <cmath>
#include <numbers>

#include "kcg/errors.hpp"

namespace kcg {

double EvidenceTerms::log_evidence() const {
  return -0.5 * quadratic - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

ExactGp ExactGp::fit(const Kernel& kernel, Points x, Vector y, double noise, const JitterPolicy& jitter) {
  if (x.rows() == 0) throw InvalidArgument("ExactGp::fit: no training points");
  if (!(noise > 0.0)) throw InvalidArgument("ExactGp::fit: noise variance must be positive");
  if (x.rows() != y.size()) throw DimensionMismatch("ExactGp::fit: inputs and targets differ in length");
  if (x.cols() != kernel.input_dim()) throw DimensionMismatch("ExactGp::fit: input dimension mismatch");
  Matrix k = gram(kernel, x);
  k.diagonal().array() += noise;
  CholeskyFactor factor = cholesky(k, jitter);
  Vector alpha = factor.solve(y);
  return ExactGp(kernel, std::move(x), std::move(y), noise, std::move(factor), std::move(alpha));
}

Vector ExactGp::predict_mean(const Points& x_star) const {
  return gram(kernel_, x_star, x_) * alpha_;
}

Matrix ExactGp::predict_cov(const Points& x_star, const Points& x_star2) const {
  const Matrix a = factor_.solve_lower(Matrix(gram(kernel_, x_, x_star)));
  if (&x_star == &x_star2) return symmetrize(gram(kernel_, x_star) - a.transpose() * a);
  const Matrix b = factor_.solve_lower(Matrix(gram(kernel_, x_, x_star2)));
  return gram(kernel_, x_star, x_star2) - a.transpose() * b;
}

Vector ExactGp::predict_var(const Points& x_star) const {
  const Matrix a = factor_.solve_lower(Matrix(gram(kernel_, x_, x_star)));
  return gram_diagonal(kernel_, x_star) - a.colwise().squaredNorm().transpose();
}

EvidenceTerms ExactGp::evidence_terms() const {
  EvidenceTerms t;
  t.quadratic = y_.dot(alpha_);
  t.logdet = factor_.logdet();
  t.n = y_.size();
  return t;
}

double ExactGp::log_evidence() const { return evidence_terms().log_evidence(); }

}  // namespace kcg
