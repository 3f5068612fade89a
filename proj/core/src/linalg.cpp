#include "kcg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "kcg/errors.hpp"

namespace kcg {

Vector vecm(const Matrix& a) {
  Vector out(a.size());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out(i * a.cols() + j) = a(i, j);
  return out;
}

Matrix tomat(const Vector& v, Index rows, Index cols) {
  if (rows < 0 || cols < 0 || v.size() != rows * cols) {
    std::ostringstream msg;
    msg << "tomat: vector of length " << v.size() << " cannot form a " << rows << "x" << cols
        << " matrix";
    throw DimensionMismatch(msg.str());
  }
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = v(i * cols + j);
  return out;
}

Index square_side(Index n) {
  const auto side = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side != n)
    throw DimensionMismatch("length " + std::to_string(n) + " is not a perfect square");
  return side;
}

Matrix symmetrize(const Matrix& c) {
  if (c.rows() != c.cols()) throw DimensionMismatch("symmetrize: matrix is not square");
  const Index n = c.rows();
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j) {
    out(j, j) = c(j, j);
    for (Index i = j + 1; i < n; ++i) {
      const double s = 0.5 * (c(i, j) + c(j, i));
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return out;
}

double asymmetry(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("asymmetry: matrix is not square");
  const double scale = a.cwiseAbs().maxCoeff();
  if (a.size() == 0 || scale == 0.0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

Vector gamma_apply(const Vector& v) {
  const Index n = square_side(v.size());
  return vecm(symmetrize(tomat(v, n, n)));
}

SymKronOperator::SymKronOperator(Matrix w, Matrix v, double symmetry_tol)
    : w_(std::move(w)), v_(std::move(v)) {
  if (w_.rows() != w_.cols() || v_.rows() != v_.cols() || w_.rows() != v_.rows())
    throw DimensionMismatch("SymKronOperator: factors must be square and of equal size");
  if (asymmetry(w_) > symmetry_tol || asymmetry(v_) > symmetry_tol)
    throw InvalidArgument("SymKronOperator: factors must be symmetric");
}

Matrix SymKronOperator::apply(const Matrix& c) const {
  if (c.rows() != side() || c.cols() != side())
    throw DimensionMismatch("SymKronOperator::apply: operand has the wrong size");
  // Gamma, then (W (x) V) vec(C) = vec(W C V^T), then Gamma again.
  const Matrix inner = symmetrize(c);
  return symmetrize(w_ * inner * v_.transpose());
}

Vector SymKronOperator::apply(const Vector& v) const {
  if (v.size() != size())
    throw DimensionMismatch("SymKronOperator::apply: vector has the wrong length");
  return vecm(apply(tomat(v, side(), side())));
}

Vector sym_kron_apply(const SymKronOperator& op, const Vector& v) { return op.apply(v); }

Matrix CholeskyFactor::solve(const Matrix& b) const {
  if (b.rows() != dim()) throw DimensionMismatch("CholeskyFactor::solve: row count mismatch");
  Matrix x = lower_.triangularView<Eigen::Lower>().solve(b);
  lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Vector CholeskyFactor::solve(const Vector& b) const {
  if (b.size() != dim()) throw DimensionMismatch("CholeskyFactor::solve: length mismatch");
  Vector x = lower_.triangularView<Eigen::Lower>().solve(b);
  lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Matrix CholeskyFactor::solve_lower(const Matrix& b) const {
  if (b.rows() != dim()) throw DimensionMismatch("CholeskyFactor::solve_lower: row count mismatch");
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

Vector CholeskyFactor::solve_lower(const Vector& b) const {
  if (b.size() != dim()) throw DimensionMismatch("CholeskyFactor::solve_lower: length mismatch");
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

double CholeskyFactor::logdet() const {
  double s = 0.0;
  for (Index i = 0; i < dim(); ++i) s += std::log(lower_(i, i));
  return 2.0 * s;
}

Matrix CholeskyFactor::reconstruct() const { return lower_ * lower_.transpose(); }

namespace {

// Factorizes a + shift * I into `l`; returns the failing column or -1.
Index factorize(const Matrix& a, double shift, double min_pivot_ratio, Matrix& l) {
  const Index n = a.rows();
  l.setZero(n, n);
  for (Index j = 0; j < n; ++j) {
    const double ajj = a(j, j) + shift;
    const double pivot = ajj - l.row(j).head(j).squaredNorm();
    if (!std::isfinite(pivot) || !(pivot > 0.0) || pivot <= min_pivot_ratio * std::abs(ajj))
      return j;
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    const Index below = n - j - 1;
    if (below > 0) {
      l.col(j).tail(below) =
          (a.col(j).tail(below) - l.bottomLeftCorner(below, j) * l.row(j).head(j).transpose()) / ljj;
    }
  }
  return -1;
}

}  // namespace

CholeskyFactor cholesky(const Matrix& a, const JitterPolicy& policy) {
  if (a.rows() != a.cols()) throw DimensionMismatch("cholesky: matrix is not square");
  if (!a.allFinite()) throw NotPositiveDefinite("cholesky: matrix has non-finite entries", 0);
  const Index n = a.rows();
  Matrix l;
  Index failed = factorize(a, 0.0, 0.0, l);
  if (failed < 0) return CholeskyFactor(std::move(l), 0.0);

  if (policy.enabled && n > 0) {
    const double scale = policy.scale > 0.0 ? policy.scale : a.diagonal().mean();
    if (scale > 0.0) {
      for (double rel = policy.first; rel <= policy.last * (1.0 + 1e-9); rel *= policy.growth) {
        const double jitter = rel * scale;
        failed = factorize(a, jitter, 0.0, l);
        if (failed < 0) return CholeskyFactor(std::move(l), jitter);
      }
    }
  }
  std::ostringstream msg;
  msg << "cholesky: " << n << "x" << n << " matrix is not positive definite (pivot " << failed
      << " failed" << (policy.enabled ? " after the jitter ladder" : "") << ")";
  throw NotPositiveDefinite(msg.str(), failed);
}

CholeskyPrefix cholesky_prefix(const Matrix& a, double min_pivot_ratio) {
  if (a.rows() != a.cols()) throw DimensionMismatch("cholesky_prefix: matrix is not square");
  Matrix l;
  const Index failed = factorize(a, 0.0, min_pivot_ratio, l);
  CholeskyPrefix out;
  out.complete = failed < 0;
  out.rank = out.complete ? a.rows() : failed;
  out.lower = l.topLeftCorner(out.rank, out.rank);
  return out;
}

Matrix sym_kron_solve_sym(const Matrix& w, const Matrix& y_sym, double symmetry_tol) {
  if (w.rows() != w.cols() || y_sym.rows() != y_sym.cols() || w.rows() != y_sym.rows())
    throw DimensionMismatch("sym_kron_solve_sym: operands must be square and of equal size");
  if (asymmetry(y_sym) > symmetry_tol)
    throw InvalidArgument("sym_kron_solve_sym: right-hand side is not symmetric");
  const CholeskyFactor lw = cholesky(w, JitterPolicy::none());
  const Matrix half = lw.solve(y_sym);           // W^{-1} Y
  return symmetrize(lw.solve(Matrix(half.transpose())));  // W^{-1} (W^{-1} Y)^T = W^{-1} Y W^{-1}
}

namespace {

// Eigen square root R with R R^T = A; tiny negative eigenvalues from rounding are clipped.
Matrix psd_root(const Matrix& a, double scale, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  if (es.info() != Eigen::Success) throw NotPositiveDefinite(std::string(what) + ": eigensolver failed", 0);
  const Vector& lambda = es.eigenvalues();
  const double tol = 1e-8 * std::max(scale, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -tol) {
    std::ostringstream msg;
    msg << what << ": eigenvalue " << lambda.minCoeff() << " below -" << tol;
    throw NotPositiveDefinite(msg.str(), 0);
  }
  return es.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

Matrix sym_kron_sample(const Matrix& w, const Matrix& w_m, Rng& rng) {
  if (w.rows() != w.cols() || w_m.rows() != w_m.cols() || w.rows() != w_m.rows())
    throw DimensionMismatch("sym_kron_sample: W and W_M must be square and of equal size");
  const Index n = w.rows();
  if (n == 0) return Matrix(0, 0);
  const double scale = std::abs(w.diagonal().mean());
  const Matrix plus = psd_root(w + w_m, scale, "sym_kron_sample: W + W_M");
  const Matrix minus = psd_root(w - w_m, scale, "sym_kron_sample: W - W_M");
  const Matrix x = standard_normal(n, n, rng);
  // (R+ (x) R-) vecm(X) = vecm(R+ X R-^T); the Gamma projector is applied by symmetrize.
  return symmetrize(plus * x * minus.transpose());
}

}  // namespace kcg
