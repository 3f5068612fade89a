#include "kcg/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "kcg/errors.hpp"

namespace kcg {

namespace {

constexpr Index kCompensatedSumThreshold = 32;

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return "se";
    case KernelFamily::Matern52:
      return "matern52";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  const std::string s = lowercase(name);
  if (s == "se" || s == "se-ard" || s == "squared-exponential" || s == "rbf")
    return KernelFamily::SquaredExponential;
  if (s == "matern52" || s == "matern-5/2" || s == "matern5/2" || s == "matern")
    return KernelFamily::Matern52;
  throw InvalidArgument("unknown kernel family '" + std::string(name) + "'");
}

Kernel::Kernel(KernelFamily family, Vector metric, double amplitude)
    : family_(family), metric_(std::move(metric)), amplitude_(amplitude) {
  if (metric_.size() == 0) throw InvalidArgument("Kernel: metric must have at least one entry");
  if (!(metric_.array() > 0.0).all() || !metric_.allFinite())
    throw InvalidArgument("Kernel: metric entries must be positive and finite");
  if (!(amplitude_ > 0.0) || !std::isfinite(amplitude_))
    throw InvalidArgument("Kernel: amplitude must be positive and finite");
}

Kernel Kernel::isotropic(KernelFamily family, Index dim, double metric, double amplitude) {
  return Kernel(family, Vector::Constant(dim, metric), amplitude);
}

double Kernel::from_squared_distance(double d2) const {
  switch (family_) {
    case KernelFamily::SquaredExponential:
      return amplitude_ * std::exp(-0.5 * d2);
    case KernelFamily::Matern52: {
      const double d = std::sqrt(d2);
      const double s5d = std::sqrt(5.0) * d;
      return amplitude_ * (1.0 + s5d + (5.0 / 3.0) * d2) * std::exp(-s5d);
    }
  }
  return 0.0;
}

double Kernel::squared_distance(const Eigen::Ref<const Vector>& x,
                                const Eigen::Ref<const Vector>& z) const {
  const Index dim = metric_.size();
  if (dim <= kCompensatedSumThreshold) {
    double s = 0.0;
    for (Index i = 0; i < dim; ++i) {
      const double diff = x(i) - z(i);
      s += metric_(i) * diff * diff;
    }
    return s;
  }
  // Neumaier summation keeps long feature vectors reproducible to the last bits.
  double s = 0.0;
  double c = 0.0;
  for (Index i = 0; i < dim; ++i) {
    const double diff = x(i) - z(i);
    const double term = metric_(i) * diff * diff;
    const double t = s + term;
    c += std::abs(s) >= std::abs(term) ? (s - t) + term : (term - t) + s;
    s = t;
  }
  return s + c;
}

double Kernel::operator()(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z) const {
  return from_squared_distance(squared_distance(x, z));
}

Kernel Kernel::axis_kernel(Index axis, bool keep_amplitude) const {
  if (axis < 0 || axis >= input_dim()) throw DimensionMismatch("axis_kernel: axis out of range");
  return Kernel(family_, Vector::Constant(1, metric_(axis)), keep_amplitude ? amplitude_ : 1.0);
}

double eval(const Kernel& kernel, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z) {
  if (x.size() != kernel.input_dim() || z.size() != kernel.input_dim())
    throw DimensionMismatch("eval: point dimension does not match the kernel metric");
  return kernel(x, z);
}

Matrix gram(const Kernel& kernel, const Points& x, const Points& z) {
  if (&x == &z) return gram(kernel, x);
  if (x.cols() != kernel.input_dim() || z.cols() != kernel.input_dim())
    throw DimensionMismatch("gram: point dimension does not match the kernel metric");
  Matrix out(x.rows(), z.rows());
  for (Index j = 0; j < z.rows(); ++j) {
    const Vector zj = z.row(j).transpose();
    for (Index i = 0; i < x.rows(); ++i) out(i, j) = kernel(x.row(i).transpose(), zj);
  }
  return out;
}

Matrix gram(const Kernel& kernel, const Points& x) {
  if (x.cols() != kernel.input_dim())
    throw DimensionMismatch("gram: point dimension does not match the kernel metric");
  const Index n = x.rows();
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j) {
    const Vector xj = x.row(j).transpose();
    out(j, j) = kernel.amplitude();
    for (Index i = j + 1; i < n; ++i) {
      const double v = kernel(x.row(i).transpose(), xj);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

Vector gram_diagonal(const Kernel& kernel, const Points& x) {
  if (x.cols() != kernel.input_dim())
    throw DimensionMismatch("gram_diagonal: point dimension does not match the kernel metric");
  return Vector::Constant(x.rows(), kernel.amplitude());
}

Points select_rows(const Points& x, const std::vector<Index>& rows) {
  Points out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) throw DimensionMismatch("select_rows: index out of range");
    out.row(static_cast<Index>(i)) = x.row(rows[i]);
  }
  return out;
}

}  // namespace kcg
