#include "kcg/structured_mvm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include <Eigen/Dense>

#include "kcg/errors.hpp"

namespace kcg {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index product_size(const std::vector<Matrix>& factors) {
  Index n = 1;
  for (const Matrix& f : factors) n *= f.rows();
  return n;
}

// v_0 (x) v_1 (x) ... with v_0 most significant.
Vector kron_vectors(const std::vector<Vector>& parts) {
  Vector out = Vector::Ones(1);
  for (const Vector& p : parts) {
    Vector next(out.size() * p.size());
    for (Index i = 0; i < out.size(); ++i) next.segment(i * p.size(), p.size()) = out[i] * p;
    out = std::move(next);
  }
  return out;
}

}  // namespace

GridSpec GridSpec::from_kernel(const Kernel& kernel, std::vector<Vector> axes) {
  if (kernel.family() != KernelFamily::SquaredExponential)
    throw InvalidArgument("GridSpec: only product kernels (squared exponential) factorize over a grid");
  if (static_cast<Index>(axes.size()) != kernel.input_dim())
    throw DimensionMismatch("GridSpec: axis count does not match the kernel dimension");
  GridSpec spec;
  for (std::size_t d = 0; d < axes.size(); ++d) {
    const Kernel axis = kernel.axis_kernel(static_cast<Index>(d), d == 0);
    const Points coords = axes[d];
    spec.factors.push_back(gram(axis, coords));
  }
  spec.axes = std::move(axes);
  return spec;
}

Index GridSpec::size() const {
  Index n = axes.empty() ? 0 : 1;
  for (const Vector& a : axes) n *= a.size();
  return n;
}

Points GridSpec::points() const {
  const Index n = size();
  const Index dims = this->dims();
  Points out(n, dims);
  Index inner = n;
  for (Index d = 0; d < dims; ++d) {
    const Index g = axes[static_cast<std::size_t>(d)].size();
    inner /= g;
    for (Index i = 0; i < n; ++i) out(i, d) = axes[static_cast<std::size_t>(d)][(i / inner) % g];
  }
  return out;
}

void GridSpec::validate() const {
  if (axes.empty() || axes.size() != factors.size()) throw InvalidArgument("GridSpec: need one factor per axis");
  for (std::size_t d = 0; d < axes.size(); ++d) {
    const Matrix& f = factors[d];
    if (axes[d].size() == 0 || f.rows() != axes[d].size() || f.cols() != axes[d].size())
      throw InvalidArgument("GridSpec: factor " + std::to_string(d) + " does not match its axis");
    if (asymmetry(f) > 1e-12) throw InvalidArgument("GridSpec: factor " + std::to_string(d) + " is not symmetric");
  }
}

Vector kron_mvm(const std::vector<Matrix>& factors, const Vector& v) {
  if (factors.empty()) throw InvalidArgument("kron_mvm: no factors");
  for (const Matrix& f : factors)
    if (f.rows() != f.cols()) throw DimensionMismatch("kron_mvm: factors must be square");
  const Index n = product_size(factors);
  if (v.size() != n) throw DimensionMismatch("kron_mvm: vector length does not match the grid");
  Vector cur = v;
  Vector next(n);
  Index outer = 1;
  Index inner = n;
  for (const Matrix& f : factors) {
    const Index g = f.rows();
    inner /= g;
    for (Index o = 0; o < outer; ++o) {
      const Eigen::Map<const RowMajor> block(cur.data() + o * g * inner, g, inner);
      Eigen::Map<RowMajor>(next.data() + o * g * inner, g, inner).noalias() = f * block;
    }
    std::swap(cur, next);
    outer *= g;
  }
  return cur;
}

Vector kron_mvm(const GridSpec& spec, const Vector& v) { return kron_mvm(spec.factors, v); }

MvmOperator kron_operator(const GridSpec& spec) {
  spec.validate();
  auto shared = std::make_shared<const std::vector<Matrix>>(spec.factors);
  return MvmOperator(spec.size(), [shared](const Vector& v) { return kron_mvm(*shared, v); });
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw InvalidArgument("fft: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles from the angle directly rather than by repeated multiplication.
      const std::complex<double> w(std::cos(angle * static_cast<double>(k)), std::sin(angle * static_cast<double>(k)));
      for (std::size_t i = 0; i < n; i += len) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> t = w * a[i + k + half];
        a[i + k] = u + t;
        a[i + k + half] = u - t;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

ToeplitzOperator::ToeplitzOperator(const Vector& first_row) : n_(first_row.size()) {
  if (n_ == 0) throw InvalidArgument("ToeplitzOperator: empty first row");
  if (!first_row.allFinite()) throw InvalidArgument("ToeplitzOperator: non-finite first row");
  std::size_t len = 1;
  while (len < static_cast<std::size_t>(2 * n_)) len <<= 1;
  spectrum_.assign(len, 0.0);
  for (Index i = 0; i < n_; ++i) spectrum_[static_cast<std::size_t>(i)] = first_row[i];
  for (Index i = 1; i < n_; ++i) spectrum_[len - static_cast<std::size_t>(i)] = first_row[i];
  fft(spectrum_, false);
}

Vector ToeplitzOperator::apply(const Vector& v) const {
  if (v.size() != n_) throw DimensionMismatch("ToeplitzOperator: vector has the wrong length");
  std::vector<std::complex<double>> buf(spectrum_.size(), 0.0);
  for (Index i = 0; i < n_; ++i) buf[static_cast<std::size_t>(i)] = v[i];
  fft(buf, false);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= spectrum_[i];
  fft(buf, true);
  Vector out(n_);
  for (Index i = 0; i < n_; ++i) out[i] = buf[static_cast<std::size_t>(i)].real();
  return out;
}

Vector toeplitz_mvm(const Vector& first_row, const Vector& v) {
  if (first_row.size() != v.size()) throw DimensionMismatch("toeplitz_mvm: row and vector differ in length");
  return ToeplitzOperator(first_row).apply(v);
}

MaskedToeplitzSpec MaskedToeplitzSpec::from_kernel(const Kernel& kernel, Index length, double spacing,
                                                   std::vector<Index> mask) {
  if (kernel.input_dim() != 1) throw DimensionMismatch("MaskedToeplitzSpec: series kernels are one-dimensional");
  MaskedToeplitzSpec spec;
  spec.length = length;
  spec.first_row.resize(length);
  const Vector origin = Vector::Zero(1);
  for (Index t = 0; t < length; ++t) spec.first_row[t] = kernel(origin, Vector::Constant(1, spacing * static_cast<double>(t)));
  spec.mask = std::move(mask);
  spec.validate();
  return spec;
}

void MaskedToeplitzSpec::validate() const {
  if (length <= 0 || first_row.size() != length) throw InvalidArgument("MaskedToeplitzSpec: first row must have the series length");
  if (!first_row.allFinite()) throw InvalidArgument("MaskedToeplitzSpec: non-finite first row");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] < 0 || mask[i] >= length) throw InvalidArgument("MaskedToeplitzSpec: mask index out of range");
    if (i > 0 && mask[i] <= mask[i - 1]) throw InvalidArgument("MaskedToeplitzSpec: mask must be strictly increasing");
  }
}

namespace {

Vector masked_apply(const MaskedToeplitzSpec& spec, const ToeplitzOperator& op, const Vector& v) {
  if (v.size() != spec.observed()) throw DimensionMismatch("masked_mvm: vector length does not match the mask");
  Vector full = Vector::Zero(spec.length);
  for (std::size_t i = 0; i < spec.mask.size(); ++i) full[spec.mask[i]] = v[static_cast<Index>(i)];
  const Vector prod = op.apply(full);
  Vector out(spec.observed());
  for (std::size_t i = 0; i < spec.mask.size(); ++i) out[static_cast<Index>(i)] = prod[spec.mask[i]];
  return out;
}

}  // namespace

Vector masked_mvm(const MaskedToeplitzSpec& spec, const Vector& v) {
  spec.validate();
  return masked_apply(spec, ToeplitzOperator(spec.first_row), v);
}

MvmOperator masked_toeplitz_operator(const MaskedToeplitzSpec& spec) {
  spec.validate();
  auto shared = std::make_shared<const MaskedToeplitzSpec>(spec);
  auto op = std::make_shared<const ToeplitzOperator>(spec.first_row);
  return MvmOperator(spec.observed(), [shared, op](const Vector& v) { return masked_apply(*shared, *op, v); });
}

Dataset grid_dataset(Index g, Index d, const Kernel& kernel, std::uint64_t seed, const GridOptions& options) {
  if (g < 1 || d < 1) throw InvalidArgument("grid_dataset: G and D must be positive");
  if (kernel.input_dim() != d) throw DimensionMismatch("grid_dataset: kernel dimension differs from D");
  double n_real = std::pow(static_cast<double>(g), static_cast<double>(d));
  if (n_real > static_cast<double>(options.max_points))
    throw InvalidArgument("grid_dataset: " + std::to_string(g) + "^" + std::to_string(d) +
                          " grid points exceed the memory budget of " + std::to_string(options.max_points));
  const double half = static_cast<double>(g) / 4.0;

  Rng axis_rng(derive_seed(seed, {1}));
  std::vector<Vector> axes;
  for (Index a = 0; a < d; ++a) {
    Vector coords = g == 1 ? Vector::Zero(1) : Vector(Vector::LinSpaced(g, -half, half));
    coords += options.axis_noise_sd * standard_normal(g, 1, axis_rng).col(0);
    axes.push_back(std::move(coords));
  }
  auto spec = std::make_shared<GridSpec>(GridSpec::from_kernel(kernel, axes));
  const Index n = spec->size();

  // Grid draw through per-axis factors and test conditioning through per-axis eigenbases.
  std::vector<Matrix> chol_factors;
  std::vector<Matrix> eigvecs;
  std::vector<Vector> eigvals;
  for (const Matrix& f : spec->factors) {
    chol_factors.push_back(cholesky(f, JitterPolicy::with_scale(f.diagonal().mean())).lower());
    Eigen::SelfAdjointEigenSolver<Matrix> es(f);
    eigvecs.push_back(es.eigenvectors());
    eigvals.push_back(es.eigenvalues().cwiseMax(0.0));
  }
  Rng draw_rng(derive_seed(seed, {2}));
  Dataset ds;
  ds.name = "grid";
  ds.seed = seed;
  ds.x = spec->points();
  ds.y = kron_mvm(chol_factors, standard_normal(n, 1, draw_rng).col(0));

  Rng test_rng(derive_seed(seed, {3}));
  std::uniform_real_distribution<double> unif(-half, half);
  ds.x_test.resize(options.test_points, d);
  for (Index j = 0; j < options.test_points; ++j)
    for (Index a = 0; a < d; ++a) ds.x_test(j, a) = unif(test_rng);

  std::vector<Matrix> qt;
  for (const Matrix& q : eigvecs) qt.push_back(q.transpose());
  const Vector spectrum = kron_vectors(eigvals).array() + options.conditioning_jitter * kernel.amplitude();
  const Vector coeff = kron_mvm(qt, ds.y).cwiseQuotient(spectrum);
  Matrix b(n, options.test_points);
  for (Index j = 0; j < options.test_points; ++j) {
    std::vector<Vector> parts;
    for (Index a = 0; a < d; ++a) {
      const Kernel axis = kernel.axis_kernel(a, a == 0);
      const Points coords = axes[static_cast<std::size_t>(a)];
      const Points pt = Points::Constant(1, 1, ds.x_test(j, a));
      parts.push_back(qt[static_cast<std::size_t>(a)] * gram(axis, coords, pt).col(0));
    }
    b.col(j) = kron_vectors(parts);
  }
  const Vector mean = b.transpose() * coeff;
  const Matrix scaled = spectrum.cwiseSqrt().cwiseInverse().asDiagonal() * b;
  const Matrix cov = symmetrize(gram(kernel, ds.x_test) - scaled.transpose() * scaled);
  const CholeskyFactor lc = cholesky(cov, JitterPolicy::with_scale(kernel.amplitude()));
  Rng cond_rng(derive_seed(seed, {4}));
  ds.y_test = mean + lc.lower() * standard_normal(options.test_points, 1, cond_rng).col(0);

  ds.metadata["generator"] = "grid";
  ds.metadata["G"] = std::to_string(g);
  ds.metadata["D"] = std::to_string(d);
  ds.grid = std::move(spec);
  return ds;
}

}  // namespace kcg
