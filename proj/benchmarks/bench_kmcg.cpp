#include <benchmark/benchmark.h>

#include "kcg/exact_gp.hpp"
#include "kcg/harness/datasets.hpp"
#include "kcg/kmcg.hpp"
#include "kcg/lowrank.hpp"

namespace {

using namespace kcg;

Dataset toy(Index n) {
  harness::ToyOptions o;
  o.train = n;
  return harness::gen_toy(7, o);
}

void BM_ExactFit(benchmark::State& state) {
  const Dataset ds = toy(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ExactGp::fit(harness::toy_kernel(), ds.x, ds.y, 0.1).log_evidence());
}
BENCHMARK(BM_ExactFit)->Arg(250)->Arg(1000);

void BM_KmcgFit(benchmark::State& state) {
  const Dataset ds = toy(state.range(0));
  KmcgOptions o;
  o.cg.tolerance = 0.0;
  o.cg.max_steps = state.range(1);
  for (auto _ : state) {
    const KmcgModel m = kmcg_fit(harness::toy_kernel(), ds.x, ds.y, 0.1, o);
    benchmark::DoNotOptimize(m.mean(ds.x_test));
  }
}
BENCHMARK(BM_KmcgFit)->Args({250, 10})->Args({1000, 10})->Args({1000, 40});

void BM_SorFit(benchmark::State& state) {
  const Dataset ds = toy(state.range(0));
  const Points xu = ds.x.topRows(state.range(1));
  for (auto _ : state) {
    const LowRankModel m = LowRankModel::fit(sor_expansion(harness::toy_kernel(), xu), ds.x, ds.y, 0.1);
    benchmark::DoNotOptimize(m.mean(ds.x_test));
  }
}
BENCHMARK(BM_SorFit)->Args({1000, 100});

}  // namespace
