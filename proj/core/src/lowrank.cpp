#include "kcg/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include "kcg/errors.hpp"

namespace kcg {

namespace {

Vector column_squared_norms(const Matrix& a) { return a.colwise().squaredNorm().transpose(); }

Points as_row(const Eigen::Ref<const Vector>& p) { return p.transpose(); }

}  // namespace

FeatureExpansion::FeatureExpansion(FeatureFn features, Matrix inner, const JitterPolicy& jitter)
    : features_(std::move(features)), inner_(std::move(inner)) {
  if (!features_) throw InvalidArgument("FeatureExpansion: empty feature function");
  if (inner_.rows() != inner_.cols()) throw DimensionMismatch("FeatureExpansion: inner matrix is not square");
  inner_factor_ = cholesky(inner_, jitter);
}

Matrix FeatureExpansion::features(const Points& x) const {
  Matrix f = features_(x);
  if (f.rows() != rank() || f.cols() != x.rows())
    throw DimensionMismatch("FeatureExpansion: feature function returned the wrong shape");
  return f;
}

Matrix FeatureExpansion::approx_gram(const Points& x, const Points& z) const {
  const Matrix a = inner_factor_.solve_lower(features(x));
  if (&x == &z) return symmetrize(a.transpose() * a);
  const Matrix b = inner_factor_.solve_lower(features(z));
  return a.transpose() * b;
}

FeatureExpansion sor_expansion(const Kernel& kernel, const Points& x_u, const JitterPolicy& jitter) {
  if (x_u.rows() == 0) throw InvalidArgument("sor_expansion: empty inducing set");
  Points centres = x_u;
  FeatureFn phi = [kernel, centres](const Points& x) { return gram(kernel, centres, x); };
  return FeatureExpansion(std::move(phi), gram(kernel, x_u), jitter);
}

LowRankModel LowRankModel::fit(FeatureExpansion expansion, const Points& x, Vector y, double noise,
                               std::optional<Kernel> prior, const JitterPolicy& jitter) {
  if (!(noise > 0.0)) throw InvalidArgument("LowRankModel::fit: noise variance must be positive");
  if (x.rows() != y.size()) throw DimensionMismatch("LowRankModel::fit: inputs and targets differ in length");
  Matrix phi = expansion.features(x);
  const Matrix a = symmetrize(phi * phi.transpose() + noise * expansion.inner());
  CholeskyFactor factor = cholesky(a, jitter);
  Vector beta = factor.solve(Vector(phi * y));
  return LowRankModel(std::move(expansion), std::move(phi), std::move(y), noise, std::move(prior),
                      std::move(factor), std::move(beta));
}

const Kernel& LowRankModel::prior_kernel() const {
  if (!prior_) throw InvalidArgument("LowRankModel: DTC variance needs the exact prior kernel");
  return *prior_;
}

Vector LowRankModel::mean(const Points& x_star) const {
  return expansion_.features(x_star).transpose() * beta_;
}

Matrix LowRankModel::cov(const Points& x_star, const Points& x_star2, VarianceMode mode) const {
  const bool same = &x_star == &x_star2;
  const Matrix f1 = expansion_.features(x_star);
  const Matrix f2 = same ? f1 : expansion_.features(x_star2);
  Matrix out;
  if (mode == VarianceMode::DtcAsPrinted) {
    Matrix b = phi_ * phi_.transpose();
    b.diagonal().array() += noise_;
    const CholeskyFactor l = cholesky(symmetrize(b));
    out = noise_ * (l.solve_lower(f1).transpose() * l.solve_lower(f2));
  } else {
    out = noise_ * (factor_.solve_lower(f1).transpose() * factor_.solve_lower(f2));
  }
  if (mode != VarianceMode::Plain) {
    const Kernel& k = prior_kernel();
    const Matrix q = expansion_.inner_factor().solve_lower(f1).transpose() *
                     expansion_.inner_factor().solve_lower(f2);
    out += (same ? gram(k, x_star) : gram(k, x_star, x_star2)) - q;
  }
  return same ? symmetrize(out) : out;
}

Vector LowRankModel::var(const Points& x_star, VarianceMode mode) const {
  const Matrix f = expansion_.features(x_star);
  Vector out;
  if (mode == VarianceMode::DtcAsPrinted) {
    Matrix b = phi_ * phi_.transpose();
    b.diagonal().array() += noise_;
    out = noise_ * column_squared_norms(cholesky(symmetrize(b)).solve_lower(f));
  } else {
    out = noise_ * column_squared_norms(factor_.solve_lower(f));
  }
  if (mode != VarianceMode::Plain)
    out += gram_diagonal(prior_kernel(), x_star) - column_squared_norms(expansion_.inner_factor().solve_lower(f));
  return out;
}

EvidenceTerms LowRankModel::evidence_terms() const {
  const Index n = y_.size();
  const Index m = expansion_.rank();
  const Vector w = factor_.solve_lower(Vector(phi_ * y_));
  EvidenceTerms t;
  t.n = n;
  t.quadratic = (y_.squaredNorm() - w.squaredNorm()) / noise_;
  // log|Phi Phi^T / s2 + Sigma| - log|Sigma| + N log s2
  t.logdet = factor_.logdet() - static_cast<double>(m) * std::log(noise_) - expansion_.inner_factor().logdet() +
             static_cast<double>(n) * std::log(noise_);
  return t;
}

GeneralInducingPosterior::GeneralInducingPosterior(Kernel w, BivariateFn mu0, const Kernel& truth, Points x_u,
                                                   Matrix s)
    : w_(std::move(w)), mu0_(std::move(mu0)), x_u_(std::move(x_u)) {
  if (s.rows() != x_u_.rows()) throw DimensionMismatch("GeneralInducingPosterior: S rows must match X_U");
  const Matrix w_m = gram(w_, x_u_);
  const CholeskyFactor l = cholesky(symmetrize(s.transpose() * w_m * s), JitterPolicy::none());
  const Matrix b = l.solve_lower(Matrix(s.transpose()));
  g_ = symmetrize(b.transpose() * b);
  Matrix innovation = gram(truth, x_u_);
  if (mu0_) innovation -= mu0_(x_u_, x_u_);
  centre_ = symmetrize(g_ * innovation * g_);
}

Matrix GeneralInducingPosterior::mean(const Points& a, const Points& b) const {
  const bool same = &a == &b;
  const Matrix wa = gram(w_, a, x_u_);
  Matrix out = same ? Matrix(wa * centre_ * wa.transpose()) : Matrix(wa * centre_ * gram(w_, x_u_, b));
  if (mu0_) out += mu0_(a, b);
  return same ? symmetrize(out) : out;
}

double GeneralInducingPosterior::w_g_w(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const {
  const Vector wa = gram(w_, x_u_, as_row(a)).col(0);
  const Vector wb = gram(w_, x_u_, as_row(b)).col(0);
  return wa.dot(g_ * wb);
}

double GeneralInducingPosterior::variance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                                          const Eigen::Ref<const Vector>& c,
                                          const Eigen::Ref<const Vector>& d) const {
  const double prior = 0.5 * (eval(w_, a, c) * eval(w_, b, d) + eval(w_, a, d) * eval(w_, b, c));
  return prior - 0.5 * w_g_w(a, c) * w_g_w(b, d) - 0.5 * w_g_w(a, d) * w_g_w(b, c);
}

EigenExpansion::EigenExpansion(FeatureFn eigenfunctions, Vector eigenvalues, PointSampler base)
    : phi_(std::move(eigenfunctions)), lambda_(std::move(eigenvalues)), base_(std::move(base)) {
  if (!phi_) throw InvalidArgument("EigenExpansion: empty eigenfunction evaluator");
  for (Index i = 0; i < lambda_.size(); ++i) {
    if (!(lambda_[i] > 0.0) || !std::isfinite(lambda_[i]))
      throw InvalidArgument("EigenExpansion: eigenvalues must be positive and finite");
    if (i > 0 && lambda_[i] > lambda_[i - 1]) throw InvalidArgument("EigenExpansion: eigenvalues must be sorted descending");
  }
}

EigenExpansion EigenExpansion::verified(FeatureFn eigenfunctions, Vector eigenvalues, PointSampler base, Rng& rng,
                                        Index draws, double tolerance) {
  EigenExpansion e(std::move(eigenfunctions), std::move(eigenvalues), std::move(base));
  const double defect = e.orthonormality_defect(rng, draws);
  if (!(defect <= tolerance))
    throw InvalidArgument("EigenExpansion: eigenfunctions are not orthonormal under the base density (defect " +
                          std::to_string(defect) + ")");
  return e;
}

Matrix EigenExpansion::eigenfunctions(const Points& x) const {
  Matrix f = phi_(x);
  if (f.rows() < size() || f.cols() != x.rows())
    throw DimensionMismatch("EigenExpansion: eigenfunction evaluator returned the wrong shape");
  if (f.rows() > size()) return f.topRows(size());
  return f;
}

double EigenExpansion::orthonormality_defect(Rng& rng, Index draws) const {
  if (!base_) throw InvalidArgument("EigenExpansion: no base density sampler");
  if (draws <= 0) throw InvalidArgument("EigenExpansion: draw count must be positive");
  const Matrix f = eigenfunctions(base_(draws, rng));
  const Matrix gram = f * f.transpose() / static_cast<double>(draws);
  return (gram - Matrix::Identity(size(), size())).cwiseAbs().maxCoeff();
}

EigenExpansion EigenExpansion::truncated(Index p) const {
  if (p < 1 || p > size()) throw InvalidArgument("EigenExpansion::truncated: count out of range");
  FeatureFn inner = phi_;
  FeatureFn head = [inner, p](const Points& x) -> Matrix { return inner(x).topRows(p); };
  return EigenExpansion(std::move(head), lambda_.head(p), base_);
}

FeatureExpansion EigenExpansion::as_features() const {
  const Index p = size();
  FeatureFn inner = phi_;
  FeatureFn f = [inner, p](const Points& x) -> Matrix {
    Matrix out = inner(x);
    return out.rows() > p ? Matrix(out.topRows(p)) : out;
  };
  return FeatureExpansion(std::move(f), Matrix(lambda_.cwiseInverse().asDiagonal()), JitterPolicy::none());
}

Vector pbr_predict(const EigenExpansion& expansion, const Points& x, const Vector& y, double noise,
                   const Points& x_star) {
  return LowRankModel::fit(expansion.as_features(), x, y, noise, std::nullopt, JitterPolicy::none()).mean(x_star);
}

EigenExpansion se_hermite_expansion(const Kernel& kernel, const Vector& centre, const Vector& sd, Index count) {
  if (kernel.family() != KernelFamily::SquaredExponential)
    throw InvalidArgument("se_hermite_expansion: closed-form eigenpairs exist only for the squared-exponential kernel");
  const Index dim = kernel.input_dim();
  if (centre.size() != dim || sd.size() != dim) throw DimensionMismatch("se_hermite_expansion: density shape mismatch");
  if (count < 1) throw InvalidArgument("se_hermite_expansion: count must be positive");
  for (Index d = 0; d < dim; ++d)
    if (!(sd[d] > 0.0)) throw InvalidArgument("se_hermite_expansion: density widths must be positive");

  // Per-axis constants of the Gaussian-measure eigenproblem.
  Vector a(dim), c(dim), log_base(dim), log_ratio(dim);
  double log_scale = std::log(kernel.amplitude());
  for (Index d = 0; d < dim; ++d) {
    a[d] = 1.0 / (4.0 * sd[d] * sd[d]);
    const double b = 0.5 * kernel.metric()[d];
    c[d] = std::sqrt(a[d] * a[d] + 2.0 * a[d] * b);
    const double big_a = a[d] + b + c[d];
    log_scale += 0.5 * std::log(2.0 * a[d] / big_a);
    log_ratio[d] = std::log(b / big_a);
  }

  // Best-first enumeration of multi-indices by eigenvalue; ties resolve lexicographically.
  using Multi = std::vector<int>;
  auto log_lambda = [&](const Multi& k) {
    double s = log_scale;
    for (Index d = 0; d < dim; ++d) s += k[d] * log_ratio[d];
    return s;
  };
  auto worse = [&](const std::pair<double, Multi>& l, const std::pair<double, Multi>& r) {
    if (l.first != r.first) return l.first < r.first;
    return l.second > r.second;
  };
  std::priority_queue<std::pair<double, Multi>, std::vector<std::pair<double, Multi>>, decltype(worse)> frontier(worse);
  std::set<Multi> seen;
  const Multi origin(static_cast<std::size_t>(dim), 0);
  frontier.emplace(log_lambda(origin), origin);
  seen.insert(origin);
  std::vector<Multi> chosen;
  Vector lambda(count);
  int max_degree = 0;
  while (static_cast<Index>(chosen.size()) < count) {
    auto [value, k] = frontier.top();
    frontier.pop();
    lambda[static_cast<Index>(chosen.size())] = std::exp(value);
    for (int v : k) max_degree = std::max(max_degree, v);
    chosen.push_back(k);
    for (Index d = 0; d < dim; ++d) {
      Multi next = k;
      ++next[d];
      if (seen.insert(next).second) frontier.emplace(log_lambda(next), next);
    }
  }

  FeatureFn phi = [chosen, a, c, centre, max_degree, dim](const Points& x) -> Matrix {
    if (x.cols() != dim) throw DimensionMismatch("se_hermite_expansion: point dimension mismatch");
    const Index n = x.rows();
    Matrix out = Matrix::Ones(static_cast<Index>(chosen.size()), n);
    std::vector<double> h(static_cast<std::size_t>(max_degree) + 1);
    for (Index j = 0; j < n; ++j) {
      for (Index d = 0; d < dim; ++d) {
        const double t = x(j, d) - centre[d];
        const double u = std::sqrt(2.0 * c[d]) * t;
        // Hermite polynomials normalized by sqrt(2^k k!).
        h[0] = 1.0;
        if (max_degree > 0) h[1] = std::sqrt(2.0) * u;
        for (int k = 1; k < max_degree; ++k)
          h[k + 1] = std::sqrt(2.0 / (k + 1)) * u * h[k] - std::sqrt(static_cast<double>(k) / (k + 1)) * h[k - 1];
        const double envelope = std::exp(-(c[d] - a[d]) * t * t) / std::pow(a[d] / c[d], 0.25);
        for (std::size_t i = 0; i < chosen.size(); ++i) out(static_cast<Index>(i), j) *= envelope * h[chosen[i][d]];
      }
    }
    return out;
  };
  PointSampler base = [centre, sd](Index n, Rng& rng) -> Points {
    Points p = standard_normal(n, centre.size(), rng);
    for (Index d = 0; d < centre.size(); ++d) p.col(d) = (p.col(d) * sd[d]).array() + centre[d];
    return p;
  };
  return EigenExpansion(std::move(phi), std::move(lambda), std::move(base));
}

namespace {

InducingPrediction inducing_predict(const Kernel& kernel, const Points& x, const Vector& y, double noise,
                                    const Points& x_u, const Points& x_star, const JitterPolicy& jitter,
                                    bool fitc) {
  if (!(noise > 0.0)) throw InvalidArgument("inducing prediction: noise variance must be positive");
  if (x.rows() != y.size()) throw DimensionMismatch("inducing prediction: inputs and targets differ in length");
  if (x_u.rows() == 0) throw InvalidArgument("inducing prediction: empty inducing set");
  const CholeskyFactor luu = cholesky(gram(kernel, x_u), jitter);
  const Matrix v = luu.solve_lower(gram(kernel, x_u, x));
  const Vector q_diag = column_squared_norms(v);
  const Vector k_diag = gram_diagonal(kernel, x);
  const Vector gap = (k_diag - q_diag).cwiseMax(0.0);
  Vector lambda = Vector::Constant(y.size(), noise);
  if (fitc) lambda += gap;

  const Vector inv_lambda = lambda.cwiseInverse();
  Matrix a = v * inv_lambda.asDiagonal() * v.transpose();
  a.diagonal().array() += 1.0;
  const CholeskyFactor la = cholesky(symmetrize(a), jitter);
  const Vector u = v * inv_lambda.cwiseProduct(y);
  const Vector w = la.solve_lower(u);

  InducingPrediction out;
  const Matrix as = luu.solve_lower(gram(kernel, x_u, x_star));
  out.mean = as.transpose() * la.solve(u);
  out.var = gram_diagonal(kernel, x_star) - column_squared_norms(as) + column_squared_norms(la.solve_lower(as));
  out.evidence.n = y.size();
  out.evidence.quadratic = y.dot(inv_lambda.cwiseProduct(y)) - w.squaredNorm();
  out.evidence.logdet = lambda.array().log().sum() + la.logdet();
  out.log_evidence = out.evidence.log_evidence();
  if (!fitc) out.log_evidence -= gap.sum() / (2.0 * noise);
  return out;
}

}  // namespace

InducingPrediction fitc_predict(const Kernel& kernel, const Points& x, const Vector& y, double noise,
                                const Points& x_u, const Points& x_star, const JitterPolicy& jitter) {
  return inducing_predict(kernel, x, y, noise, x_u, x_star, jitter, true);
}

InducingPrediction vfe_predict(const Kernel& kernel, const Points& x, const Vector& y, double noise,
                               const Points& x_u, const Points& x_star, const JitterPolicy& jitter) {
  return inducing_predict(kernel, x, y, noise, x_u, x_star, jitter, false);
}

}  // namespace kcg
