#include <benchmark/benchmark.h>

#include "slabsep/lpp.hpp"
#include "slabsep/rng.hpp"
#include "slabsep/tasep.hpp"

using namespace slabsep;

namespace {

void BM_Philox(benchmark::State& state) {
  CounterRng rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(rng());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Philox);

void BM_SiteUniform(benchmark::State& state) {
  std::int64_t x = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(site_uniform(7, x, x + 1));
    ++x;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SiteUniform);

// Level sweep across the slab from p_0 to p_m; reports cells per second.
void BM_SlabSweep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const std::int64_t m = 4 * n;
  const lpp::Environment env(lpp::EnvironmentSpec::slab(n, 0.6, 0.2, 11));
  std::uint64_t cells = 0;
  for (auto _ : state) {
    lpp::LevelSweep sweep(env, lpp::Window::box({0, 0}, {m, m}), {{{0, 0}, 0.0}});
    while (sweep.advance()) {
    }
    cells += sweep.cells();
    benchmark::DoNotOptimize(sweep.values().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(cells));
}
BENCHMARK(BM_SlabSweep)->Arg(64)->Arg(256)->Arg(1024);

void BM_FullPlaneGeodesic(benchmark::State& state) {
  const auto m = state.range(0);
  const lpp::Environment env(lpp::EnvironmentSpec::full_plane(3));
  for (auto _ : state) benchmark::DoNotOptimize(lpp::geodesic(env, {0, 0}, {m, m}).value);
}
BENCHMARK(BM_FullPlaneGeodesic)->Arg(128)->Arg(512);

// Simulator events per second.
void BM_Simulator(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  tasep::Simulator sim(Configuration::all_empty(n), {0.6, 0.2});
  CounterRng rng(5);
  std::int64_t events = 0;
  for (auto _ : state) {
    if (sim.step(rng, 1e300)) ++events;
  }
  state.SetItemsProcessed(events);
}
BENCHMARK(BM_Simulator)->Arg(64)->Arg(1024);

void BM_CoupledToCoalescence(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const model::BoundaryParams p{0.6, 0.2};
  std::uint64_t r = 0;
  for (auto _ : state) {
    const auto res = tasep::coupled_simulate(Configuration::all_full(n), Configuration::all_empty(n), p,
                                             tasep::default_timeout(p, n), derive_seed(1, r++));
    benchmark::DoNotOptimize(res.tau);
  }
}
BENCHMARK(BM_CoupledToCoalescence)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
