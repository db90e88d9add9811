#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "oracles/offload_oracle.hpp"
#include "ts3ra/offload.hpp"
#include "ts3ra/rng.hpp"

namespace ts3ra::offload {
namespace {

SwitchProfile sw(std::uint32_t id, double cap, double load, double tx, double loss) {
  SwitchProfile s;
  s.id = SwitchId{id};
  s.service_capacity_bps = cap;
  s.current_load_bps = load;
  s.transmission_rate_bps = tx;
  s.loss_rate = loss;
  return s;
}

Flow fl(std::uint32_t id, double rate) {
  Flow f;
  f.id = FlowId{id};
  f.rate_bps = rate;
  return f;
}

TEST(EdgeWeight, Formula) {
  const WeightCoefficients c;
  EXPECT_DOUBLE_EQ(edge_weight(fl(0, 1), sw(0, 10, 10, 10, 0), c), 1.0);
  EXPECT_LT(edge_weight(fl(0, 1), sw(0, 10, 2, 5, 1.0), c),
            edge_weight(fl(0, 1), sw(0, 10, 2, 5, 0.0), c));
  EXPECT_LT(edge_weight(fl(0, 1), sw(0, 10, 6, 5, 0.1), c),
            edge_weight(fl(0, 1), sw(0, 10, 4, 5, 0.1), c));
}

TEST(EdgeWeight, SliceGammaOverride) {
  WeightCoefficients c;
  c.slice_gamma[slice_index(ServiceType::kUrllc)] = 10.0;
  Flow f = fl(0, 1);
  f.slice = ServiceType::kUrllc;
  EXPECT_DOUBLE_EQ(edge_weight(f, sw(0, 10, 0, 10, 0.1), c), 1.0 + 1.0 - 1.0);
}

TEST(Assignment, ForcedChoice) {
  const auto g = OffloadGraph::build({fl(3, 1)}, {sw(7, 10, 0, 5, 0)}, {});
  const auto a = max_weight_assignment(g);
  ASSERT_EQ(a.assignment.size(), 1u);
  EXPECT_EQ(a.assignment[0].first.value, 3u);
  EXPECT_EQ(a.assignment[0].second.value, 7u);
}

TEST(Assignment, OversizedFlowUnassigned) {
  const auto g = OffloadGraph::build({fl(0, 100), fl(1, 1)}, {sw(0, 10, 0, 5, 0)}, {});
  const auto a = max_weight_assignment(g);
  ASSERT_EQ(a.unassigned.size(), 1u);
  EXPECT_EQ(a.unassigned[0].value, 0u);
}

TEST(Assignment, NoSwitchesFlagged) {
  const auto g = OffloadGraph::build({fl(0, 1)}, {}, {});
  EXPECT_TRUE(max_weight_assignment(g).no_switches);
}

void check_against_brute(std::uint64_t seed, bool equal_rates) {
  Rng rng(seed);
  const std::size_t nf = 1 + rng.below(6);
  const std::size_t ns = 1 + rng.below(4);
  std::vector<Flow> flows;
  for (std::size_t i = 0; i < nf; ++i) {
    flows.push_back(fl(static_cast<std::uint32_t>(i), equal_rates ? 2.0 : rng.uniform(1, 5)));
  }
  std::vector<SwitchProfile> sws;
  for (std::size_t j = 0; j < ns; ++j) {
    const double cap = rng.uniform(4, 12);
    sws.push_back(sw(static_cast<std::uint32_t>(j), cap, rng.uniform(0, cap), rng.uniform(1, 10),
                     rng.uniform(0, 1)));
  }
  WeightCoefficients c{1.0, 1.0, rng.uniform(0.5, 3.0)};
  const auto g = OffloadGraph::build(flows, sws, c);
  const auto a = max_weight_assignment(g);
  const auto brute = oracle::offload_brute(flows, sws, c.alpha, c.beta, c.gamma);
  EXPECT_TRUE(a.optimal);
  EXPECT_NEAR(a.total_weight, std::max(brute.best, 0.0), 1e-9) << "seed " << seed;
  std::map<std::uint32_t, double> used;
  for (auto [f, s] : a.assignment) used[s.value] += flows[f.value].rate_bps;
  for (auto [s, u] : used) EXPECT_LE(u, sws[s].remaining_capacity_bps() + 1e-9);
}

TEST(Assignment, MatchesBruteForceMixedRates) {
  for (std::uint64_t s = 0; s < 100; ++s) check_against_brute(s, false);
}

TEST(Assignment, MatchesBruteForceEqualRates) {
  for (std::uint64_t s = 100; s < 200; ++s) check_against_brute(s, true);
}

TEST(Assignment, GreedyFallbackBeyondBudget) {
  std::vector<Flow> flows;
  for (std::uint32_t i = 0; i < 30; ++i) flows.push_back(fl(i, 1.0 + 0.01 * i));
  std::vector<SwitchProfile> sws;
  for (std::uint32_t j = 0; j < 10; ++j) sws.push_back(sw(j, 8, 0, 4, 0.01 * j));
  SolverConfig cfg;
  cfg.edge_budget = 10;
  const auto a = max_weight_assignment(OffloadGraph::build(flows, sws, {}), cfg);
  EXPECT_EQ(a.solver, SolverKind::kGreedy);
  EXPECT_FALSE(a.optimal);
}

TEST(Rebalance, MovesExcessToEmptySwitch) {
  std::vector<SwitchProfile> sws{sw(0, 10, 14, 10, 0.01), sw(1, 10, 0, 10, 0.01)};
  std::vector<ActiveFlow> active;
  for (std::uint32_t i = 0; i < 7; ++i) active.push_back({fl(i, 2.0), SwitchId{0}});
  const auto plan = rebalance(sws, active, SwitchId{0}, {});
  EXPECT_TRUE(plan.complete);
  EXPECT_LE(plan.trigger_load_after_bps, 10.0);
  double moved = 0;
  for (const auto& m : plan.migrations) {
    EXPECT_EQ(m.to.value, 1u);
    moved += 2.0;
  }
  EXPECT_LE(moved, 10.0);
  EXPECT_GE(moved, 4.0);
}

TEST(Rebalance, NoOverloadNoPlan) {
  std::vector<SwitchProfile> sws{sw(0, 10, 4, 10, 0.01), sw(1, 10, 0, 10, 0.01)};
  std::vector<ActiveFlow> active{{fl(0, 2.0), SwitchId{0}}, {fl(1, 2.0), SwitchId{0}}};
  EXPECT_TRUE(rebalance(sws, active, SwitchId{0}, {}).migrations.empty());
}

TEST(Rebalance, NeverOverloadsDestination) {
  Rng rng(5);
  for (int c = 0; c < 100; ++c) {
    std::vector<SwitchProfile> sws;
    const std::size_t ns = 2 + rng.below(3);
    for (std::uint32_t j = 0; j < ns; ++j) {
      sws.push_back(sw(j, 10, j == 0 ? 0 : rng.uniform(0, 9), rng.uniform(1, 10), rng.uniform(0, 0.2)));
    }
    std::vector<ActiveFlow> active;
    double load = 0;
    for (std::uint32_t i = 0; i < 8; ++i) {
      const double r = rng.uniform(0.5, 3);
      active.push_back({fl(i, r), SwitchId{0}});
      load += r;
    }
    sws[0].current_load_bps = load;
    const auto plan = rebalance(sws, active, SwitchId{0}, {});
    std::vector<double> after(ns);
    for (std::size_t j = 1; j < ns; ++j) after[j] = sws[j].current_load_bps;
    for (const auto& m : plan.migrations) after[m.to.value] += active[m.flow.value].flow.rate_bps;
    for (std::size_t j = 1; j < ns; ++j) {
      if (after[j] > sws[j].current_load_bps) EXPECT_LE(after[j], 10.0 + 1e-9);
    }
  }
}

TEST(MigrationLog, HeaderAndRow) {
  std::ostringstream os;
  write_migration_header(os);
  write_migration_row(os, 1.5, {FlowId{3}, SwitchId{0}, SwitchId{2}}, "overload");
  EXPECT_EQ(os.str(), "time,flow_id,from_switch,to_switch,reason\n1.5,3,0,2,overload\n");
}

}  // namespace
}  // namespace ts3ra::offload
