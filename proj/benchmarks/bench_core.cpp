#include <benchmark/benchmark.h>

#include "micromaser/oracle.hpp"
#include "micromaser/sde.hpp"

using namespace micromaser;

static void BM_Drift(benchmark::State& state) {
  const FpeModel model(PumpState::clone_mixture(0.8, 3), CavityConfig{0.5, 0.02});
  for (auto _ : state) benchmark::DoNotOptimize(model.drift(12.0, 0.0));
}
BENCHMARK(BM_Drift);

static void BM_Coefficients(benchmark::State& state) {
  const FpeModel model(PumpState::clone_mixture(0.8, 3), CavityConfig{0.5, 0.02});
  const int panels = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(model.coefficients(12.0, 0.0, panels));
}
BENCHMARK(BM_Coefficients)->Arg(32)->Arg(128)->Arg(512);

static void BM_NoiseReport(benchmark::State& state) {
  const auto pump = PumpState::z_state(std::sqrt(0.4), std::sqrt(0.6), 0);
  const auto cav = *operating_point_for_B(pump, 0.02, 6.8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(noise_report(pump, cav, NoiseOptions{.near_B = 6.8}));
  }
}
BENCHMARK(BM_NoiseReport);

static void BM_InjectionCycle(benchmark::State& state) {
  OracleConfig c;
  c.pump = PumpState::product_upper(2);
  c.gT = 0.45;
  c.CT = 0.08;
  c.n_max = static_cast<int>(state.range(0));
  const InjectionMap map(c);
  const CMatrix rho = phase_averaged_coherent_state(c.n_max, 0.2 * c.n_max);
  for (auto _ : state) benchmark::DoNotOptimize(map(rho));
}
BENCHMARK(BM_InjectionCycle)->Arg(64)->Arg(160)->Arg(320);

static void BM_InjectionSetup(benchmark::State& state) {
  OracleConfig c;
  c.pump = PumpState::clone_mixture(0.7, 3);
  c.n_max = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(InjectionMap(c));
}
BENCHMARK(BM_InjectionSetup)->Arg(160);

static void BM_SdeSample(benchmark::State& state) {
  const auto pump = PumpState::clone_mixture(0.7, 2);
  const auto cav = *operating_point_for_B(pump, 0.02, 2.0);
  SdeOptions o;
  o.n_traj = 500;
  o.t_end = 100.0;
  o.dt = 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(sde_sample(pump, cav, o));
}
BENCHMARK(BM_SdeSample)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
