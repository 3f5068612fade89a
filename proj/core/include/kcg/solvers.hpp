#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "kcg/kernels.hpp"
#include "kcg/linalg.hpp"

namespace kcg {

/// A symmetric linear operator known only through v -> A v.
/// Copies share the backend; backends must be deterministic.
class MvmOperator {
 public:
  using ApplyFn = std::function<Vector(const Vector&)>;

  MvmOperator(Index dim, ApplyFn apply);

  /// Dense backend; the matrix is shared between copies.
  static MvmOperator dense(Matrix a);

  Index dim() const noexcept { return dim_; }
  /// Throws DimensionMismatch if v has the wrong length.
  Vector apply(const Vector& v) const;
  Vector operator()(const Vector& v) const { return apply(v); }
  /// Column-by-column application to a block of vectors.
  Matrix apply(const Matrix& v) const;

  /// v -> A v + shift v
  MvmOperator shifted(double shift) const;

 private:
  Index dim_;
  std::shared_ptr<const ApplyFn> apply_;
};

/// Largest relative defects of the linearity and symmetry checks on random probes.
struct OperatorProbe {
  double linearity = 0.0;  ///< max |A(u + v) - Au - Av| / (|Au| + |Av|)
  double symmetry = 0.0;   ///< max |u^T A v - v^T A u| / (|u| |Av| + |v| |Au|)
};
OperatorProbe probe_operator(const MvmOperator& op, Rng& rng, int probes = 4);

enum class CgTermination { Converged, MaxSteps, Breakdown };
std::string_view to_string(CgTermination reason);

enum class CgVariant { Textbook, Reorthogonalized };
std::string_view to_string(CgVariant variant);

struct CgOptions {
  /// Absolute residual threshold; when empty, relative_tolerance * |b| is used.
  std::optional<double> tolerance;
  double relative_tolerance = 0.01;
  /// Step cap; negative means the operator dimension.
  Index max_steps = -1;

  double resolve_tolerance(const Vector& b) const;
  Index resolve_max_steps(Index dim) const;
};

/// Everything a CG run produced. Column i of `products` is exactly the
/// operator output for column i of `directions`.
struct CgTrace {
  Vector solution;
  Matrix directions;                  ///< N x P search directions s_0 .. s_{P-1}
  Matrix products;                    ///< N x P, A s_i
  Matrix residuals;                   ///< N x (P + 1), r_0 .. r_P as used by the iteration
  std::vector<double> residual_norms; ///< |r_0| .. |r_P|
  std::vector<double> step_seconds;   ///< cumulative wall clock after each step
  Index steps = 0;
  CgTermination reason = CgTermination::Converged;
  double tolerance = 0.0;
};

/// Conjugate gradients exactly as the textbook recursion:
/// r0 = A x0 - b, s0 = -r0, and the usual alpha / beta updates while |r| > eps.
/// Nonpositive curvature s^T A s truncates the trace with reason Breakdown.
CgTrace cg_textbook(const MvmOperator& op, const Vector& b, const Vector& x0, const CgOptions& options = {});

/// Same recursion, but every new residual is made orthogonal to all previous
/// residuals by two passes of modified Gram-Schmidt. Also stops (Breakdown,
/// unless the threshold is met) when the reorthogonalized residual collapses
/// below a few ulps of |b|.
CgTrace cg_reorth(const MvmOperator& op, const Vector& b, const Vector& x0, const CgOptions& options = {});

CgTrace run_cg(CgVariant variant, const MvmOperator& op, const Vector& b, const Vector& x0, const CgOptions& options);

/// Galerkin solution S (S^T Z)^{-1} S^T b in span(S), with Z = A S.
/// Throws NotPositiveDefinite if S^T Z cannot be factorized under the jitter ladder.
Vector fom_solution(const Matrix& s, const Matrix& z, const Vector& b);

/// Largest |r_i^T r_j| / (|r_i| |r_j|) over i != j among the trace residuals, skipping
/// residuals no longer than 16 eps |r_0|.
double residual_orthogonality_defect(const CgTrace& trace);

/// Plain CG regression: solve (K + s2 I) x = y with the chosen variant and
/// project with fom_solution, then predict k(X*, X) x. `k_operator`, when
/// given, replaces the dense K (it must not include the noise term).
Vector cg_predict_mean(const Kernel& kernel, const Points& x, const Vector& y, double noise,
                       const Points& x_star, const CgOptions& options = {},
                       CgVariant variant = CgVariant::Reorthogonalized,
                       const MvmOperator* k_operator = nullptr);

}  // namespace kcg
