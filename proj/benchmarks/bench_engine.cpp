#include <benchmark/benchmark.h>

#include "ts3ra/engine.hpp"

using namespace ts3ra;

static void BM_RunScenario(benchmark::State& state) {
  Scenario s;
  s.network.duration_s = static_cast<double>(state.range(0));
  const auto model = engine::prepare_model(s);
  for (auto _ : state) {
    engine::RunOptions opt;
    opt.model = model;
    benchmark::DoNotOptimize(engine::run_scenario(s, std::move(opt)));
  }
}
BENCHMARK(BM_RunScenario)->Arg(30)->Arg(300)->Unit(benchmark::kMillisecond);
