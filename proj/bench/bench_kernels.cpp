#include <benchmark/benchmark.h>
#include <omp.h>

#include "fsens/kernels.hpp"
#include "fsens/nuisance.hpp"
#include "fsens/rng.hpp"

using namespace fsens;

namespace {

struct Problem {
  Eigen::MatrixXd phi;
  Eigen::VectorXd y, a, b;
};

Problem make_problem(Eigen::Index n, Eigen::Index terms) {
  rng::Philox gen(7);
  Problem p;
  p.phi.resize(n, terms);
  p.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.phi(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < terms; ++j) p.phi(i, j) = gen.uniform() - 0.5;
    p.y(i) = gen.normal();
  }
  p.a = Eigen::VectorXd::Zero(terms);
  p.a(0) = 1.0;
  p.b = Eigen::VectorXd::Zero(terms);
  return p;
}

void erm_risk(benchmark::State& state, kernels::Exec exec) {
  const auto p = make_problem(state.range(0), 13);
  const auto spec = Divergence::kl();
  for (auto _ : state) {
    auto r = kernels::erm_risk(spec, 0.5, 1e-3, p.phi, p.y, p.a, p.b, true, exec);
    benchmark::DoNotOptimize(r.value);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ErmRiskSerial(benchmark::State& s) { erm_risk(s, kernels::Exec::Serial); }
void BM_ErmRiskParallel(benchmark::State& s) { erm_risk(s, kernels::Exec::Parallel); }

// Forest fitting parallelizes over trees; range(1) is the thread count.
void BM_ForestFit(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  rng::Philox gen(11);
  Eigen::MatrixXd X(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) X(i, j) = gen.uniform();
    y(i) = X(i, 0) + 0.5 * X(i, 1) * X(i, 1) + 0.3 * gen.normal();
  }
  nuisance::RegressorSpec spec;
  spec.trees = 100;
  const int before = omp_get_max_threads();
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    auto reg = nuisance::fit_regressor(spec, X, y, 3);
    benchmark::DoNotOptimize(reg.get());
  }
  omp_set_num_threads(before);
}

}  // namespace

BENCHMARK(BM_ErmRiskSerial)->Arg(2000)->Arg(20000)->Arg(200000);
BENCHMARK(BM_ErmRiskParallel)->Arg(2000)->Arg(20000)->Arg(200000);
BENCHMARK(BM_ForestFit)->Args({5000, 1})->Args({5000, 4})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
