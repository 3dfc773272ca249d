// Serial reference loop against the OpenMP trajectory team.

#include "stf/experiments.hpp"

#include <benchmark/benchmark.h>

#include <numbers>

#include <omp.h>

namespace {

stf::ExperimentSetup bench_setup()
{
    stf::ExperimentSetup s;
    const double L = 2 * std::numbers::pi;
    s.solver.grid = stf::PeriodicGrid(L, 64);
    s.solver.spec = stf::build_spectrum(stf::SpectrumMode::power_decay, 0.5, 3.0, 8, L);
    s.solver.params.n = 2.5;
    s.solver.params.eps = 1e-3;
    s.solver.params.c_strat = stf::c_strat(s.solver.spec, 2.5);
    s.solver.params.S = 2.0 * stf::s_thresholds(2.5, s.solver.params.c_strat).S_A3star;
    s.solver.dt0 = 1e-3;
    s.solver.T = 0.02;
    return stf::with_delta(s, 0.1);
}

void run(benchmark::State& state, int threads)
{
    const stf::ExperimentSetup s = bench_setup();
    const int M = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(stf::run_ensemble(s, M, 1, {1.0, 2.0}, threads));
    state.SetItemsProcessed(state.iterations() * M);
}

void BM_EnsembleSerial(benchmark::State& state) { run(state, 1); }
void BM_EnsembleOpenMP(benchmark::State& state) { run(state, omp_get_max_threads()); }

} // namespace

BENCHMARK(BM_EnsembleSerial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnsembleOpenMP)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
