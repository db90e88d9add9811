#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "ts3ra/domain.hpp"

namespace ts3ra::offload {

struct WeightCoefficients {
  double alpha = 1.0;  // remaining-capacity term
  double beta = 1.0;   // transmission-rate term
  double gamma = 1.0;  // loss-rate penalty
  /// Optional loss penalty per slice (indexed by slice), overriding gamma.
  std::array<std::optional<double>, 3> slice_gamma{};

  double gamma_for(ServiceType s) const {
    return slice_gamma[slice_index(s)].value_or(gamma);
  }
};

bool feasible(const Flow& flow, const SwitchProfile& sw);

/// alpha * remaining / capacity + beta * tx_rate / capacity - gamma * loss.
double edge_weight(const Flow& flow, const SwitchProfile& sw,
                   const WeightCoefficients& c);

struct Edge {
  std::size_t flow = 0;  // index into OffloadGraph::flows
  std::size_t sw = 0;    // index into OffloadGraph::switches
  double weight = 0.0;
};

struct OffloadGraph {
  std::vector<Flow> flows;
  std::vector<SwitchProfile> switches;
  std::vector<Edge> edges;

  /// One edge per feasible (flow, switch) pair.
  static OffloadGraph build(std::vector<Flow> flows,
                            std::vector<SwitchProfile> switches,
                            const WeightCoefficients& c);
  void validate() const;
};

enum class SolverKind : std::uint8_t { kMinCostFlow, kBranchAndBound, kGreedy };
std::string_view solver_name(SolverKind k);

struct SolverConfig {
  /// Above this many edges the exact search is skipped.
  std::size_t edge_budget = 1000;
  /// Search nodes the exact search may expand before giving up.
  std::size_t node_budget = 2'000'000;
  /// Added to every edge during the search (not to the reported weight).
  /// A large bonus makes the solver place as many flows as possible first.
  double cardinality_bonus = 0.0;
};

struct FlowAssignment {
  std::vector<std::pair<FlowId, SwitchId>> assignment;  // flow order
  std::vector<FlowId> unassigned;
  double total_weight = 0.0;
  bool optimal = true;
  bool no_switches = false;
  SolverKind solver = SolverKind::kBranchAndBound;

  std::optional<SwitchId> switch_of(FlowId f) const;
};

/// Capacity-feasible assignment of maximum total weight. Flows whose rates
/// are all equal use an exact min-cost flow; otherwise a branch-and-bound
/// search, falling back to a greedy plan (optimal = false) beyond budget.
FlowAssignment max_weight_assignment(const OffloadGraph& graph,
                                     const SolverConfig& config = {});

struct ActiveFlow {
  Flow flow;
  SwitchId on;
};

struct Migration {
  FlowId flow;
  SwitchId from;
  SwitchId to;
};

struct RebalancePlan {
  std::vector<Migration> migrations;
  std::vector<FlowId> residual;  // could not be placed anywhere
  bool complete = true;
  double trigger_load_after_bps = 0.0;
};

/// Reassigns the flows of an overloaded switch across itself and every
/// under-loaded switch. The trigger keeps whatever load is not explained by
/// its listed flows. Returns an empty plan when the trigger is not
/// overloaded.
RebalancePlan rebalance(const std::vector<SwitchProfile>& switches,
                        const std::vector<ActiveFlow>& active, SwitchId trigger,
                        const WeightCoefficients& coeffs,
                        const SolverConfig& config = {});

inline constexpr double kMigrationDelayS = 10e-6;

void write_migration_header(std::ostream& os);
void write_migration_row(std::ostream& os, double time_s, const Migration& m,
                         std::string_view reason);

}  // namespace ts3ra::offload
