#include "kcg/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "kcg/errors.hpp"

namespace kcg {

MvmOperator::MvmOperator(Index dim, ApplyFn apply)
    : dim_(dim), apply_(std::make_shared<const ApplyFn>(std::move(apply))) {
  if (dim < 0) throw InvalidArgument("MvmOperator: negative dimension");
  if (!*apply_) throw InvalidArgument("MvmOperator: empty apply function");
}

MvmOperator MvmOperator::dense(Matrix a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("MvmOperator::dense: matrix is not square");
  auto shared = std::make_shared<const Matrix>(std::move(a));
  const Index n = shared->rows();
  return MvmOperator(n, [shared](const Vector& v) -> Vector { return (*shared) * v; });
}

Vector MvmOperator::apply(const Vector& v) const {
  if (v.size() != dim_) throw DimensionMismatch("MvmOperator::apply: vector has the wrong length");
  return (*apply_)(v);
}

Matrix MvmOperator::apply(const Matrix& v) const {
  if (v.rows() != dim_) throw DimensionMismatch("MvmOperator::apply: block has the wrong row count");
  Matrix out(dim_, v.cols());
  for (Index j = 0; j < v.cols(); ++j) out.col(j) = (*apply_)(v.col(j));
  return out;
}

MvmOperator MvmOperator::shifted(double shift) const {
  auto inner = apply_;
  return MvmOperator(dim_, [inner, shift](const Vector& v) -> Vector {
    Vector out = (*inner)(v);
    out += shift * v;
    return out;
  });
}

OperatorProbe probe_operator(const MvmOperator& op, Rng& rng, int probes) {
  OperatorProbe out;
  const Index n = op.dim();
  for (int p = 0; p < probes; ++p) {
    const Vector u = standard_normal(n, 1, rng).col(0);
    const Vector v = standard_normal(n, 1, rng).col(0);
    const Vector au = op.apply(u);
    const Vector av = op.apply(v);
    const Vector auv = op.apply(Vector(u + v));
    const double lin_scale = au.norm() + av.norm();
    if (lin_scale > 0.0) out.linearity = std::max(out.linearity, (auv - au - av).norm() / lin_scale);
    const double sym_scale = u.norm() * av.norm() + v.norm() * au.norm();
    if (sym_scale > 0.0)
      out.symmetry = std::max(out.symmetry, std::abs(u.dot(av) - v.dot(au)) / sym_scale);
  }
  return out;
}

std::string_view to_string(CgTermination reason) {
  switch (reason) {
    case CgTermination::Converged:
      return "converged";
    case CgTermination::MaxSteps:
      return "maxsteps";
    case CgTermination::Breakdown:
      return "breakdown";
  }
  return "unknown";
}

std::string_view to_string(CgVariant variant) {
  return variant == CgVariant::Textbook ? "textbook" : "reorth";
}

double CgOptions::resolve_tolerance(const Vector& b) const {
  if (tolerance) return *tolerance;
  return relative_tolerance * b.norm();
}

Index CgOptions::resolve_max_steps(Index dim) const { return max_steps < 0 ? dim : max_steps; }

namespace {

using Clock = std::chrono::steady_clock;

// Shared driver; `reorthogonalize` switches on the Gram-Schmidt pass against stored residuals.
CgTrace conjugate_gradients(const MvmOperator& op, const Vector& b, const Vector& x0,
                            const CgOptions& options, bool reorthogonalize) {
  const Index n = op.dim();
  if (b.size() != n || x0.size() != n) throw DimensionMismatch("cg: right-hand side or start has the wrong length");
  const double eps = options.resolve_tolerance(b);
  if (!(eps >= 0.0)) throw InvalidArgument("cg: tolerance must be nonnegative");
  const Index max_steps = options.resolve_max_steps(n);
  const double collapse = 16.0 * std::numeric_limits<double>::epsilon() * b.norm();

  const auto start = Clock::now();
  CgTrace trace;
  trace.tolerance = eps;
  const Index capacity = std::min<Index>(max_steps, n) + 1;
  Matrix s_cols(n, std::max<Index>(capacity - 1, 0));
  Matrix z_cols(n, std::max<Index>(capacity - 1, 0));
  Matrix r_cols(n, capacity);
  Matrix basis;  // unit residuals for reorthogonalization
  if (reorthogonalize) basis.resize(n, capacity);

  Vector x = x0;
  Vector r = op.apply(x0) - b;
  Vector s = -r;
  double rr = r.squaredNorm();
  r_cols.col(0) = r;
  trace.residual_norms.push_back(std::sqrt(rr));
  if (reorthogonalize && rr > 0.0) basis.col(0) = r / std::sqrt(rr);

  Index i = 0;
  trace.reason = CgTermination::Converged;
  while (std::sqrt(rr) > eps) {
    if (i >= max_steps || i >= r_cols.cols() - 1) {
      trace.reason = CgTermination::MaxSteps;
      break;
    }
    const Vector z = op.apply(s);
    const double sz = s.dot(z);
    if (!std::isfinite(sz) || !(sz > 0.0)) {
      trace.reason = CgTermination::Breakdown;
      break;
    }
    s_cols.col(i) = s;
    z_cols.col(i) = z;
    const double alpha = rr / sz;
    x += alpha * s;
    Vector r_next = r + alpha * z;
    if (reorthogonalize) {
      for (int pass = 0; pass < 2; ++pass)
        for (Index j = 0; j <= i; ++j) r_next -= basis.col(j).dot(r_next) * basis.col(j);
    }
    const double rr_next = r_next.squaredNorm();
    ++i;
    r_cols.col(i) = r_next;
    trace.residual_norms.push_back(std::sqrt(rr_next));
    trace.step_seconds.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    if (!std::isfinite(rr_next)) {
      trace.reason = CgTermination::Breakdown;
      r = r_next;
      rr = rr_next;
      break;
    }
    const double beta = rr_next / rr;
    s = -r_next + beta * s;
    r = std::move(r_next);
    rr = rr_next;
    if (reorthogonalize) {
      const double norm = std::sqrt(rr);
      if (norm <= collapse) {
        trace.reason = norm <= eps ? CgTermination::Converged : CgTermination::Breakdown;
        break;
      }
      basis.col(i) = r / norm;
    }
  }

  trace.steps = i;
  trace.solution = std::move(x);
  trace.directions = s_cols.leftCols(i);
  trace.products = z_cols.leftCols(i);
  trace.residuals = r_cols.leftCols(i + 1);
  return trace;
}

}  // namespace

CgTrace cg_textbook(const MvmOperator& op, const Vector& b, const Vector& x0, const CgOptions& options) {
  return conjugate_gradients(op, b, x0, options, false);
}

CgTrace cg_reorth(const MvmOperator& op, const Vector& b, const Vector& x0, const CgOptions& options) {
  return conjugate_gradients(op, b, x0, options, true);
}

CgTrace run_cg(CgVariant variant, const MvmOperator& op, const Vector& b, const Vector& x0,
               const CgOptions& options) {
  return variant == CgVariant::Textbook ? cg_textbook(op, b, x0, options) : cg_reorth(op, b, x0, options);
}

Vector fom_solution(const Matrix& s, const Matrix& z, const Vector& b) {
  if (s.rows() != z.rows() || s.cols() != z.cols() || s.rows() != b.size())
    throw DimensionMismatch("fom_solution: S, Z and b disagree in shape");
  if (s.cols() == 0) return Vector::Zero(s.rows());
  const CholeskyFactor l = cholesky(symmetrize(s.transpose() * z));
  return s * l.solve(Vector(s.transpose() * b));
}

double residual_orthogonality_defect(const CgTrace& trace) {
  const Matrix& r = trace.residuals;
  if (r.cols() == 0) return 0.0;
  // Residuals at rounding level carry no direction.
  const double floor = 16.0 * std::numeric_limits<double>::epsilon() * r.col(0).norm();
  double worst = 0.0;
  for (Index i = 0; i < r.cols(); ++i) {
    const double ni = r.col(i).norm();
    if (ni <= floor) continue;
    for (Index j = 0; j < i; ++j) {
      const double nj = r.col(j).norm();
      if (nj <= floor) continue;
      worst = std::max(worst, std::abs(r.col(i).dot(r.col(j))) / (ni * nj));
    }
  }
  return worst;
}

Vector cg_predict_mean(const Kernel& kernel, const Points& x, const Vector& y, double noise,
                       const Points& x_star, const CgOptions& options, CgVariant variant,
                       const MvmOperator* k_operator) {
  if (x.rows() != y.size()) throw DimensionMismatch("cg_predict_mean: inputs and targets differ in length");
  if (!(noise > 0.0)) throw InvalidArgument("cg_predict_mean: noise variance must be positive");
  const MvmOperator a = k_operator ? k_operator->shifted(noise) : MvmOperator::dense(gram(kernel, x)).shifted(noise);
  if (a.dim() != x.rows()) throw DimensionMismatch("cg_predict_mean: operator dimension mismatch");
  const CgTrace trace = run_cg(variant, a, y, Vector::Zero(y.size()), options);
  const Vector weights = fom_solution(trace.directions, trace.products, y);
  return gram(kernel, x_star, x) * weights;
}

}  // namespace kcg
