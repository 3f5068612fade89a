#pragma once

#include "kcg/linalg.hpp"

namespace kcg::harness {

struct RelErr {
  double value = 0.0;
  Index used = 0;
  Index excluded = 0;  ///< points with |exact| below the guard
};

/// Points with |exact| < guard * max|exact| are left out of the average.
inline constexpr double kRelErrGuard = 1e-12;

/// Mean of |exact - approx| / |exact| over the guarded points; NaN if none remain.
RelErr relerr_detail(const Vector& exact, const Vector& approx);
double metric_relerr(const Vector& exact, const Vector& approx);
/// The same average applied to predictive variances.
double metric_var_err(const Vector& exact_var, const Vector& approx_var);
/// |exact - approx| / |exact| for the scalar evidence.
double metric_ev_err(double exact, double approx);
/// sum_j (y_j - pred_j)^2 / reference_variance; the sum is not divided by the count.
double metric_smse(const Vector& y_star, const Vector& pred, double reference_variance);

}  // namespace kcg::harness
