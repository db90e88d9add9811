#include <benchmark/benchmark.h>

#include "ts3ra/slicenet.hpp"

using namespace ts3ra;

static void BM_SelectSlice(benchmark::State& state) {
  Rng rng(1);
  slicenet::SliceNet net(slicenet::SliceNetConfig{}, rng);
  const auto fv = slicenet::SliceFeatureVector::make(ServiceType::kEmbb, 0.8, 42, 0.6, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(net.select_slice(fv));
}
BENCHMARK(BM_SelectSlice);

static void BM_TrainEpoch(benchmark::State& state) {
  Rng rng(2);
  slicenet::SliceNet net(slicenet::SliceNetConfig{}, rng);
  const auto data = slicenet::synthetic_dataset(1000, rng);
  for (auto _ : state) benchmark::DoNotOptimize(slicenet::train(net, data, {1, 0.01, 16}, rng));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);
