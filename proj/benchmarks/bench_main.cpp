#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "flockfem/linalg.hpp"
#include "flockfem/scenarios.hpp"
#include "flockfem/stepper.hpp"

using namespace flockfem;

namespace {

void BM_KernelTable(benchmark::State& state) {
  const MeshPtr m = build_mesh(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_kernel_table(m, KernelSpec::rational_sqrt()));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KernelTable)->RangeMultiplier(2)->Range(25, 400)->Complexity();

void BM_Convolve(benchmark::State& state) {
  const MeshPtr m = build_mesh(static_cast<int>(state.range(0)));
  const auto table = build_kernel_table(m, KernelSpec::rational_sqrt());
  const FEFunction rho = interpolate(m, Space::P3, two_flock_density);
  for (auto _ : state) benchmark::DoNotOptimize(convolve(rho, *table));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Convolve)->RangeMultiplier(2)->Range(25, 400)->Complexity(benchmark::oNSquared);

void BM_Advance(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(1));
  const MeshPtr m = build_mesh(static_cast<int>(state.range(0)));
  const auto table = build_kernel_table(m, KernelSpec::rational_sqrt());
  const SimState s = two_flock_state(*table, variant);
  StepConfig cfg;
  cfg.variant = variant;
  for (auto _ : state) benchmark::DoNotOptimize(advance(s, *table, cfg));
}
BENCHMARK(BM_Advance)
    ->ArgsProduct({{50, 100, 200},
                   {static_cast<int>(Variant::CuckerSmale), static_cast<int>(Variant::MotschTadmor),
                    static_cast<int>(Variant::SModel)}});

void BM_BandedSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int p = 3;
  std::mt19937 gen(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CyclicBandMatrix a(n, p);
  for (int i = 0; i < n; ++i)
    for (int d = -p; d <= p; ++d) a.at(i, ((i + d) % n + n) % n) = u(gen) + (d == 0 ? 8.0 : 0.0);
  std::vector<double> b(n);
  for (double& v : b) v = u(gen);
  for (auto _ : state) benchmark::DoNotOptimize(solve(a, b));
  state.SetComplexityN(n);
}
BENCHMARK(BM_BandedSolve)->RangeMultiplier(4)->Range(64, 16384)->Complexity(benchmark::oN);

}  // namespace

BENCHMARK_MAIN();
