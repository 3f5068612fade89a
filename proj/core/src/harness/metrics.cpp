#include "kcg/harness/metrics.hpp"

#include <cmath>
#include <limits>

#include "kcg/errors.hpp"

namespace kcg::harness {

RelErr relerr_detail(const Vector& exact, const Vector& approx) {
  if (exact.size() != approx.size()) throw DimensionMismatch("relerr: vectors differ in length");
  RelErr out;
  if (exact.size() == 0) {
    out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double floor = kRelErrGuard * exact.cwiseAbs().maxCoeff();
  double sum = 0.0;
  for (Index i = 0; i < exact.size(); ++i) {
    const double e = std::abs(exact[i]);
    if (e < floor || e == 0.0) {
      ++out.excluded;
      continue;
    }
    sum += std::abs(exact[i] - approx[i]) / e;
    ++out.used;
  }
  out.value = out.used > 0 ? sum / static_cast<double>(out.used) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

double metric_relerr(const Vector& exact, const Vector& approx) { return relerr_detail(exact, approx).value; }

double metric_var_err(const Vector& exact_var, const Vector& approx_var) {
  return relerr_detail(exact_var, approx_var).value;
}

double metric_ev_err(double exact, double approx) {
  if (exact == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::abs(exact - approx) / std::abs(exact);
}

double metric_smse(const Vector& y_star, const Vector& pred, double reference_variance) {
  if (y_star.size() != pred.size()) throw DimensionMismatch("smse: vectors differ in length");
  if (!(reference_variance > 0.0)) throw InvalidArgument("smse: reference variance must be positive");
  return (y_star - pred).squaredNorm() / reference_variance;
}

}  // namespace kcg::harness
