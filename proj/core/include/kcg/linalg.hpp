#pragma once

// Dense linear algebra: row-stacking vectorization, symmetric Kronecker products
// applied through their factors, and a jitter-escalating Cholesky factorization.

#include <Eigen/Core>

#include "kcg/random.hpp"

namespace kcg {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Stacks the rows of `a`: result[i * cols + j] = a(i, j).
Vector vecm(const Matrix& a);

/// Inverse of vecm. Throws DimensionMismatch unless v.size() == rows * cols.
Matrix tomat(const Vector& v, Index rows, Index cols);

/// Side length of a square matrix stored as a length-n vector; throws if n is not a square.
Index square_side(Index n);

/// The symmetrization projector: vecm(C / 2 + C^T / 2) for C = tomat(v).
Vector gamma_apply(const Vector& v);

/// (C + C^T) / 2 with both triangles written from the same sum, so the
/// result is symmetric bit for bit.
Matrix symmetrize(const Matrix& c);

/// Largest |A - A^T| entry relative to the largest |A| entry (0 for a zero matrix).
double asymmetry(const Matrix& a);

/// W (x)s V = Gamma (W (x) V) Gamma, stored as its two N x N factors.
/// Acts on length-N^2 vectors in O(N^3) time and O(N^2) memory.
class SymKronOperator {
 public:
  /// Throws DimensionMismatch on shape errors and InvalidArgument when a
  /// factor is not symmetric to `symmetry_tol` (relative).
  SymKronOperator(Matrix w, Matrix v, double symmetry_tol = 1e-10);

  Index side() const noexcept { return w_.rows(); }
  Index size() const noexcept { return w_.rows() * w_.rows(); }
  const Matrix& left() const noexcept { return w_; }
  const Matrix& right() const noexcept { return v_; }

  Vector apply(const Vector& v) const;
  /// Matrix form of apply: returns tomat(apply(vecm(c))).
  Matrix apply(const Matrix& c) const;

 private:
  Matrix w_;
  Matrix v_;
};

/// Convenience wrapper for SymKronOperator{w, v}.apply(v).
Vector sym_kron_apply(const SymKronOperator& op, const Vector& v);

/// Jitter escalation for Cholesky. Attempts jitter 0 first, then
/// first * scale, growing by `growth` until last * scale is exhausted.
/// scale <= 0 means "use mean(diag(A))".
struct JitterPolicy {
  bool enabled = true;
  double first = 1e-12;
  double last = 1e-4;
  double growth = 10.0;
  double scale = 0.0;

  static JitterPolicy none() {
    JitterPolicy p;
    p.enabled = false;
    return p;
  }
  static JitterPolicy with_scale(double s) {
    JitterPolicy p;
    p.scale = s;
    return p;
  }
};

/// Lower-triangular L with L L^T = A + jitter I.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  CholeskyFactor(Matrix lower, double jitter) : lower_(std::move(lower)), jitter_(jitter) {}

  Index dim() const noexcept { return lower_.rows(); }
  const Matrix& lower() const noexcept { return lower_; }
  /// Diagonal shift that was needed for the factorization to succeed.
  double jitter() const noexcept { return jitter_; }

  /// (L L^T)^{-1} b.
  Matrix solve(const Matrix& b) const;
  Vector solve(const Vector& b) const;
  /// L^{-1} b.
  Matrix solve_lower(const Matrix& b) const;
  Vector solve_lower(const Vector& b) const;
  /// 2 * sum(log L_ii) = log det(L L^T).
  double logdet() const;
  Matrix reconstruct() const;

 private:
  Matrix lower_;
  double jitter_ = 0.0;
};

/// Factorizes a symmetric matrix (only the lower triangle is read).
/// Throws NotPositiveDefinite once the jitter ladder is exhausted.
CholeskyFactor cholesky(const Matrix& a, const JitterPolicy& policy = {});

/// Result of factorizing the largest leading principal block that factorizes.
struct CholeskyPrefix {
  Matrix lower;  ///< rank x rank factor of a.topLeftCorner(rank, rank)
  Index rank = 0;
  bool complete = false;
};

/// Column-by-column Cholesky without jitter that stops at the first pivot
/// not exceeding min_pivot_ratio * a(j, j) (or non-finite). Because leading
/// blocks of a Cholesky factor factor the leading blocks of `a`, the
/// returned factor is exact for the first `rank` rows and columns.
CholeskyPrefix cholesky_prefix(const Matrix& a, double min_pivot_ratio = 0.0);

/// Log determinant of a factor.
inline double logdet(const CholeskyFactor& l) { return l.logdet(); }

/// (L L^T)^{-1} b.
inline Matrix chol_solve(const CholeskyFactor& l, const Matrix& b) { return l.solve(b); }

/// The unique symmetric X with (W (x)s W) vecm(X) = vecm(Y), i.e. W^{-1} Y W^{-1}.
/// Throws NotPositiveDefinite if W is not SPD and InvalidArgument if Y is not symmetric.
Matrix sym_kron_solve_sym(const Matrix& w, const Matrix& y_sym, double symmetry_tol = 1e-10);

/// Draws Y with vecm(Y) ~ N(0, W (x)s W - W_M (x)s W_M) as
/// tomat(Gamma (R+ (x) R-) vecm(X)) with R+ R+^T = W + W_M and R- R-^T = W - W_M
/// taken from eigendecompositions. Throws NotPositiveDefinite when either sum has an
/// eigenvalue below -1e-8 times the larger of mean(diag(W)) and its spectral radius.
/// The output is exactly symmetric.
Matrix sym_kron_sample(const Matrix& w, const Matrix& w_m, Rng& rng);

}  // namespace kcg
