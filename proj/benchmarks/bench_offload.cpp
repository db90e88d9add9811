#include <benchmark/benchmark.h>

#include "ts3ra/offload.hpp"
#include "ts3ra/rng.hpp"

using namespace ts3ra;

namespace {

offload::OffloadGraph instance(std::size_t flows, std::size_t switches, bool equal_rates) {
  Rng rng(flows * 31 + switches);
  std::vector<Flow> fs;
  for (std::size_t i = 0; i < flows; ++i) {
    Flow f;
    f.id = FlowId{static_cast<std::uint32_t>(i)};
    f.rate_bps = equal_rates ? 40960 : rng.uniform(2e4, 8e4);
    fs.push_back(f);
  }
  std::vector<SwitchProfile> ss;
  for (std::size_t j = 0; j < switches; ++j) {
    SwitchProfile s;
    s.id = SwitchId{static_cast<std::uint32_t>(j)};
    s.service_capacity_bps = j < 3 ? 4e6 : 2e6;
    s.transmission_rate_bps = s.service_capacity_bps;
    s.current_load_bps = rng.uniform(0, s.service_capacity_bps * 0.9);
    s.loss_rate = j < 3 ? 0.02 : 0.12;
    ss.push_back(s);
  }
  return offload::OffloadGraph::build(fs, ss, {});
}

}  // namespace

static void BM_MinCostFlow(benchmark::State& state) {
  const auto g = instance(static_cast<std::size_t>(state.range(0)), 8, true);
  for (auto _ : state) benchmark::DoNotOptimize(offload::max_weight_assignment(g));
}
BENCHMARK(BM_MinCostFlow)->Arg(8)->Arg(32)->Arg(100);

static void BM_BranchAndBound(benchmark::State& state) {
  const auto g = instance(static_cast<std::size_t>(state.range(0)), 4, false);
  for (auto _ : state) benchmark::DoNotOptimize(offload::max_weight_assignment(g));
}
BENCHMARK(BM_BranchAndBound)->Arg(4)->Arg(6)->Arg(10);
