#include <benchmark/benchmark.h>

#include "ts3ra/ddos.hpp"

using namespace ts3ra;

static void BM_Renyi(benchmark::State& state) {
  const std::vector<double> p(static_cast<std::size_t>(state.range(0)),
                              1.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ddos::renyi_entropy(p, 2.0));
}
BENCHMARK(BM_Renyi)->Arg(50)->Arg(1000);

static void BM_FloodSuite(benchmark::State& state) {
  Rng rng(1);
  const auto suite = ddos::synthetic_flood_suite({}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ddos::evaluate(suite, {}));
}
BENCHMARK(BM_FloodSuite)->Unit(benchmark::kMillisecond);
