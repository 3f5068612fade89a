#include <benchmark/benchmark.h>

#include "kcg/random.hpp"
#include "kcg/structured_mvm.hpp"

namespace {

using namespace kcg;

void BM_KronMvm(benchmark::State& state) {
  const Index g = state.range(0), d = state.range(1);
  Rng rng(1);
  std::vector<Matrix> factors;
  Index n = 1;
  for (Index a = 0; a < d; ++a) {
    factors.push_back(standard_normal(g, g, rng));
    n *= g;
  }
  const Vector v = standard_normal(n, 1, rng).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(kron_mvm(factors, v));
  state.SetComplexityN(n);
}
BENCHMARK(BM_KronMvm)->Args({64, 2})->Args({16, 3})->Args({32, 3})->Args({16, 4});

void BM_DenseMvm(benchmark::State& state) {
  const Index n = state.range(0);
  Rng rng(2);
  const Matrix a = standard_normal(n, n, rng);
  const Vector v = standard_normal(n, 1, rng).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(Vector(a * v));
}
BENCHMARK(BM_DenseMvm)->Arg(1024)->Arg(4096);

void BM_Toeplitz(benchmark::State& state) {
  const Index n = state.range(0);
  const Kernel k = Kernel::isotropic(KernelFamily::Matern52, 1, 1.0, 1.0);
  Vector row(n);
  for (Index i = 0; i < n; ++i) row[i] = eval(k, Vector::Zero(1), Vector::Constant(1, 0.01 * static_cast<double>(i)));
  const ToeplitzOperator op(row);
  Rng rng(3);
  const Vector v = standard_normal(n, 1, rng).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(v));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Toeplitz)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity();

}  // namespace
