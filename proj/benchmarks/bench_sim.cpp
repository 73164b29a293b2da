#include <benchmark/benchmark.h>

#include "mrolab/environment.hpp"
#include "mrolab/radio.hpp"

using namespace mrolab;

namespace {

void BM_WorldWindow(benchmark::State& state) {
  radio::RadioConfig rc;
  rc.warmup_s = 10;
  radio::ScenarioConfig sc;
  sc.load = static_cast<double>(state.range(0)) / 10.0;
  sc.window_seconds = 10;
  radio::World world(rc, sc);
  world.warm_up();
  for (auto _ : state) benchmark::DoNotOptimize(world.run_window(0));
  state.counters["ues"] = static_cast<double>(world.ue_count());
}
BENCHMARK(BM_WorldWindow)->Arg(2)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_EnvironmentEpisode(benchmark::State& state) {
  radio::RadioConfig rc;
  radio::ScenarioConfig sc;
  sc.window_seconds = 10;
  for (auto _ : state) {
    CioEnvironment env(rc, sc, {}, 1);
    env.reset(0);
    for (int t = 0; t < 4; ++t) benchmark::DoNotOptimize(env.step(1));
  }
}
BENCHMARK(BM_EnvironmentEpisode)->Unit(benchmark::kMillisecond);

}  // namespace
