#include "kcg/kmcg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kcg/errors.hpp"

namespace kcg {

void KernelPriorConfig::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("KernelPriorConfig: scale must be positive");
}

KmcgRun kmcg_run_cg(const Kernel& kernel, const Points& x, const Vector& y, const KmcgOptions& options) {
  const Index n = x.rows();
  if (n == 0) throw InvalidArgument("kmcg: no training points");
  if (y.size() != n) throw DimensionMismatch("kmcg: inputs and targets differ in length");
  if (x.cols() != kernel.input_dim()) throw DimensionMismatch("kmcg: input dimension mismatch");
  options.prior.validate();
  if (!options.prior.is_standard())
    throw InvalidArgument("kmcg: closed forms need the zero prior mean and w = k");

  KmcgRun run;
  if (options.subset) {
    run.subset = *options.subset;
    std::vector<Index> sorted = run.subset;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty() || sorted.front() < 0 || sorted.back() >= n ||
        std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InvalidArgument("kmcg: subset must hold distinct indices into X");
  } else {
    const Index m = options.inducing < 0 ? n : options.inducing;
    if (m < 1 || m > n) throw InvalidArgument("kmcg: inducing count must lie in [1, N]");
    if (m == n) {
      run.subset.resize(static_cast<std::size_t>(n));
      std::iota(run.subset.begin(), run.subset.end(), Index{0});
    } else {
      Rng rng(options.seed);
      run.subset = sample_without_replacement(n, m, rng);
    }
  }
  const Index m = static_cast<Index>(run.subset.size());
  bool identity = m == n;
  for (Index i = 0; identity && i < m; ++i) identity = run.subset[static_cast<std::size_t>(i)] == i;

  const Points x_m = identity ? x : select_rows(x, run.subset);
  Vector y_m(m);
  for (Index i = 0; i < m; ++i) y_m[i] = y[run.subset[static_cast<std::size_t>(i)]];

  if (options.k_m_operator) {
    if (options.k_m_operator->dim() != m) throw DimensionMismatch("kmcg: K_M operator has the wrong dimension");
    run.trace = cg_reorth(*options.k_m_operator, y_m, Vector::Zero(m), options.cg);
  } else {
    run.trace = cg_reorth(MvmOperator::dense(gram(kernel, x_m)), y_m, Vector::Zero(m), options.cg);
  }

  auto z = std::make_shared<const Matrix>(run.trace.products);
  run.z = z;
  if (identity) {
    run.r = z;
  } else {
    const Matrix& s = run.trace.directions;
    Matrix r(n, s.cols());
    const Index block = std::max<Index>(options.block_rows, 1);
    for (Index start = 0; start < n; start += block) {
      const Index len = std::min(block, n - start);
      r.middleRows(start, len) = gram(kernel, Points(x.middleRows(start, len)), x_m) * s;
    }
    run.r = std::make_shared<const Matrix>(std::move(r));
  }
  return run;
}

KmcgModel KmcgModel::from_run(const Kernel& kernel, const Points& x, const Vector& y, double noise,
                              const KmcgRun& run, Index steps, const KmcgOptions& options) {
  if (!(noise > 0.0)) throw InvalidArgument("kmcg: noise variance must be positive");
  if (steps < 0 || steps > run.trace.steps) throw InvalidArgument("kmcg: steps exceed the CG trace");
  if (y.size() != x.rows() || run.r->rows() != x.rows()) throw DimensionMismatch("kmcg: run does not match the data");
  options.prior.validate();

  KmcgModel model;
  model.kernel_ = kernel;
  model.subset_ = run.subset;
  model.x_m_ = select_rows(x, run.subset);
  model.y_ = y;
  model.noise_ = noise;
  model.alpha_ = options.prior.scale;
  model.requested_ = steps;
  model.reason_ = run.trace.reason;

  const Matrix s = run.trace.directions.leftCols(steps);
  const Matrix& z_all = *run.z;
  const Matrix& r_all = *run.r;
  const Matrix a1 = symmetrize(s.transpose() * z_all.leftCols(steps));
  const Matrix rr = r_all.leftCols(steps).transpose() * r_all.leftCols(steps);
  const Matrix a2 = symmetrize(noise * a1 + rr);

  // Leading blocks of a Cholesky factor factor the leading blocks, so both
  // factors truncate to the same prefix without refactorizing.
  const CholeskyPrefix p1 = cholesky_prefix(a1, options.truncation_ratio);
  const CholeskyPrefix p2 = cholesky_prefix(a2, options.truncation_ratio);
  const Index p = std::min(p1.rank, p2.rank);
  model.s_ = s.leftCols(p);
  model.l1_ = p1.lower.topLeftCorner(p, p);
  model.l2_ = p2.lower.topLeftCorner(p, p);

  if (p == z_all.cols()) {
    model.z_ = run.z;
    model.r_ = run.r;
  } else {
    model.z_ = std::make_shared<const Matrix>(z_all.leftCols(p));
    model.r_ = run.r == run.z ? model.z_ : std::make_shared<const Matrix>(r_all.leftCols(p));
  }

  const Index m = model.x_m_.rows();
  if (p == 0) {
    model.t1_ = Matrix::Zero(0, m);
    model.t2_ = Matrix::Zero(0, m);
    model.q_ = Vector::Zero(0);
    model.mean_weights_ = Vector::Zero(m);
    return model;
  }
  const Matrix st = model.s_.transpose();
  model.t1_ = model.l1_.triangularView<Eigen::Lower>().solve(st);
  model.t2_ = model.l2_.triangularView<Eigen::Lower>().solve(st);
  const Vector rty = model.r_->transpose() * y;
  model.q_ = model.l2_.triangularView<Eigen::Lower>().solve(rty);
  model.mean_weights_ = model.t2_.transpose() * model.q_;
  return model;
}

double KmcgModel::kernel_eval(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z) const {
  if (steps() == 0) return 0.0;
  const Vector bx = t1_ * cross(Points(x.transpose())).col(0);
  const Vector bz = t1_ * cross(Points(z.transpose())).col(0);
  return bx.dot(bz);
}

Matrix KmcgModel::kernel_gram(const Points& a, const Points& b) const {
  const Matrix ba = t1_ * cross(a);
  if (&a == &b) return symmetrize(ba.transpose() * ba);
  return ba.transpose() * (t1_ * cross(b));
}

Vector KmcgModel::mean(const Points& x_star) const { return cross(x_star).transpose() * mean_weights_; }

Matrix KmcgModel::cov(const Points& x_star, const Points& x_star2) const {
  const bool same = &x_star == &x_star2;
  const Matrix k1 = cross(x_star);
  const Matrix k2 = same ? k1 : cross(x_star2);
  Matrix out = same ? gram(kernel_, x_star) : gram(kernel_, x_star, x_star2);
  out -= (t1_ * k1).transpose() * (t1_ * k2);
  out += noise_ * ((t2_ * k1).transpose() * (t2_ * k2));
  return same ? symmetrize(out) : out;
}

Vector KmcgModel::var(const Points& x_star) const {
  const Matrix k1 = cross(x_star);
  return gram_diagonal(kernel_, x_star) - (t1_ * k1).colwise().squaredNorm().transpose() +
         noise_ * (t2_ * k1).colwise().squaredNorm().transpose();
}

EvidenceTerms KmcgModel::evidence_terms() const {
  EvidenceTerms t;
  t.n = y_.size();
  const Index p = steps();
  t.quadratic = (y_.squaredNorm() - q_.squaredNorm()) / noise_;
  double logdet = static_cast<double>(t.n - p) * std::log(noise_);
  for (Index i = 0; i < p; ++i) logdet += 2.0 * (std::log(l2_(i, i)) - std::log(l1_(i, i)));
  t.logdet = logdet;
  return t;
}

double KmcgModel::uncertainty(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z) const {
  const double kxx = eval(kernel_, x, x);
  const double kzz = eval(kernel_, z, z);
  const double kxz = eval(kernel_, x, z);
  const double hxx = kernel_eval(x, x);
  const double hzz = kernel_eval(z, z);
  const double hxz = kernel_eval(x, z);
  return alpha_ * 0.5 * (kxx * kzz + kxz * kxz - hxx * hzz - hxz * hxz);
}

double KmcgModel::error_bound_ratio(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z,
                                    double k_true) const {
  const double scale = eval(kernel_, x, x) * eval(kernel_, z, z);
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  const double err = k_true - kernel_eval(x, z);
  const double num = err * err;
  const double den = uncertainty(x, z);
  if (num <= floor) return 0.0;
  if (den <= alpha_ * floor) return std::numeric_limits<double>::infinity();
  return num / den;
}

Matrix KmcgModel::sample(const Points& x_s, Rng& rng) const {
  const Matrix w = gram(kernel_, x_s);
  const Matrix w_m = kernel_gram(x_s, x_s);
  return symmetrize(w_m + std::sqrt(alpha_) * sym_kron_sample(w, w_m, rng));
}

KmcgModel kmcg_fit(const Kernel& kernel, const Points& x, const Vector& y, double noise, const KmcgOptions& options) {
  const KmcgRun run = kmcg_run_cg(kernel, x, y, options);
  return KmcgModel::from_run(kernel, x, y, noise, run, run.trace.steps, options);
}

}  // namespace kcg
