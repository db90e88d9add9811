#include <benchmark/benchmark.h>

#include "ts3ra/hopfield.hpp"
#include "ts3ra/rng.hpp"

using namespace ts3ra;

static void BM_StorkeyUpdate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  hopfield::StatePattern xi(n);
  for (auto& v : xi) v = rng.bernoulli(0.5) ? 1 : -1;
  const auto w = hopfield::WeightMatrix::zeros(n);
  for (auto _ : state) benchmark::DoNotOptimize(hopfield::storkey_update(w, xi));
}
BENCHMARK(BM_StorkeyUpdate)->Arg(12)->Arg(64)->Arg(256);

static void BM_Classify(benchmark::State& state) {
  const auto net = hopfield::HopfieldNet::trained();
  for (auto _ : state) benchmark::DoNotOptimize(net.classify({1, 0, 1}));
}
BENCHMARK(BM_Classify);
