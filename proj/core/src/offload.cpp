#include "ts3ra/offload.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ts3ra::offload {

bool feasible(const Flow& flow, const SwitchProfile& sw) {
  return sw.remaining_capacity_bps() >= flow.rate_bps;
}

double edge_weight(const Flow& flow, const SwitchProfile& sw,
                   const WeightCoefficients& c) {
  const double cap = sw.service_capacity_bps;
  return c.alpha * (sw.remaining_capacity_bps() / cap) +
         c.beta * (sw.transmission_rate_bps / cap) -
         c.gamma_for(flow.slice) * sw.loss_rate;
}

OffloadGraph OffloadGraph::build(std::vector<Flow> flows,
                                 std::vector<SwitchProfile> switches,
                                 const WeightCoefficients& c) {
  OffloadGraph g{std::move(flows), std::move(switches), {}};
  for (std::size_t f = 0; f < g.flows.size(); ++f) {
    for (std::size_t s = 0; s < g.switches.size(); ++s) {
      if (feasible(g.flows[f], g.switches[s])) {
        g.edges.push_back({f, s, edge_weight(g.flows[f], g.switches[s], c)});
      }
    }
  }
  return g;
}

void OffloadGraph::validate() const {
  for (const auto& e : edges) {
    if (e.flow >= flows.size() || e.sw >= switches.size()) {
      throw InvariantError("OffloadGraph: edge endpoint out of range");
    }
    if (!feasible(flows[e.flow], switches[e.sw])) {
      throw InvariantError("OffloadGraph: edge to a switch without capacity");
    }
    if (!std::isfinite(e.weight)) {
      throw InvariantError("OffloadGraph: non-finite weight");
    }
  }
}

std::string_view solver_name(SolverKind k) {
  switch (k) {
    case SolverKind::kMinCostFlow: return "min-cost-flow";
    case SolverKind::kBranchAndBound: return "branch-and-bound";
    case SolverKind::kGreedy: return "greedy";
  }
  return "?";
}

std::optional<SwitchId> FlowAssignment::switch_of(FlowId f) const {
  for (const auto& [flow, sw] : assignment) {
    if (flow == f) return sw;
  }
  return std::nullopt;
}

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// choice[f] is an index into graph.switches or kNone.
using Choice = std::vector<std::size_t>;

FlowAssignment to_result(const OffloadGraph& g, const Choice& choice,
                         SolverKind kind, bool optimal) {
  FlowAssignment r;
  r.solver = kind;
  r.optimal = optimal;
  r.no_switches = g.switches.empty();
  for (std::size_t f = 0; f < g.flows.size(); ++f) {
    if (choice[f] == kNone) {
      r.unassigned.push_back(g.flows[f].id);
      continue;
    }
    r.assignment.emplace_back(g.flows[f].id, g.switches[choice[f]].id);
    for (const auto& e : g.edges) {
      if (e.flow == f && e.sw == choice[f]) {
        r.total_weight += e.weight;
        break;
      }
    }
  }
  return r;
}

std::vector<double> remaining(const OffloadGraph& g) {
  std::vector<double> rem;
  for (const auto& s : g.switches) rem.push_back(s.remaining_capacity_bps());
  return rem;
}

double search_value(const OffloadGraph& g, const Choice& choice,
                    double bonus) {
  double v = 0.0;
  for (const auto& e : g.edges) {
    if (choice[e.flow] == e.sw) v += e.weight + bonus;
  }
  return v;
}

Choice greedy(const OffloadGraph& g, double bonus) {
  std::vector<const Edge*> order;
  for (const auto& e : g.edges) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](const Edge* a, const Edge* b) { return a->weight > b->weight; });
  Choice choice(g.flows.size(), kNone);
  auto rem = remaining(g);
  for (const Edge* e : order) {
    if (e->weight + bonus <= 0.0 || choice[e->flow] != kNone) continue;
    if (rem[e->sw] >= g.flows[e->flow].rate_bps) {
      rem[e->sw] -= g.flows[e->flow].rate_bps;
      choice[e->flow] = e->sw;
    }
  }
  return choice;
}

class BranchAndBound {
 public:
  BranchAndBound(const OffloadGraph& g, const SolverConfig& cfg)
      : g_(g), bonus_(cfg.cardinality_bonus), budget_(cfg.node_budget) {
    const std::size_t nf = g.flows.size();
    per_flow_.resize(nf);
    for (const auto& e : g.edges) per_flow_[e.flow].push_back(&e);
    std::vector<double> best_gain(nf, 0.0);
    for (std::size_t f = 0; f < nf; ++f) {
      auto& v = per_flow_[f];
      std::stable_sort(v.begin(), v.end(), [](const Edge* a, const Edge* b) {
        return a->weight > b->weight;
      });
      if (!v.empty()) best_gain[f] = std::max(0.0, v.front()->weight + bonus_);
    }
    order_.resize(nf);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return best_gain[a] > best_gain[b];
    });
    suffix_.assign(nf + 1, 0.0);
    for (std::size_t k = nf; k-- > 0;) {
      suffix_[k] = suffix_[k + 1] + best_gain[order_[k]];
    }
    rem_ = remaining(g);
    current_.assign(nf, kNone);
  }

  // Returns false when the node budget ran out.
  bool run(Choice seed) {
    best_ = std::move(seed);
    best_value_ = search_value(g_, best_, bonus_);
    dfs(0, 0.0);
    return !exhausted_;
  }
  const Choice& best() const { return best_; }

 private:
  void dfs(std::size_t k, double value) {
    if (exhausted_) return;
    if (++nodes_ > budget_) {
      exhausted_ = true;
      return;
    }
    if (k == order_.size()) {
      if (value > best_value_ + 1e-12) {
        best_value_ = value;
        best_ = current_;
      }
      return;
    }
    if (value + suffix_[k] <= best_value_ + 1e-12) return;
    const std::size_t f = order_[k];
    const double rate = g_.flows[f].rate_bps;
    for (const Edge* e : per_flow_[f]) {
      const double gain = e->weight + bonus_;
      if (gain <= 0.0) break;
      if (rem_[e->sw] < rate) continue;
      rem_[e->sw] -= rate;
      current_[f] = e->sw;
      dfs(k + 1, value + gain);
      current_[f] = kNone;
      rem_[e->sw] += rate;
    }
    dfs(k + 1, value);
  }

  const OffloadGraph& g_;
  double bonus_;
  std::size_t budget_;
  std::vector<std::vector<const Edge*>> per_flow_;
  std::vector<std::size_t> order_;
  std::vector<double> suffix_;
  std::vector<double> rem_;
  Choice current_;
  Choice best_;
  double best_value_ = 0.0;
  std::size_t nodes_ = 0;
  bool exhausted_ = false;
};

// Equal flow rates: each switch holds floor(rem / rate) flows, so the
// problem is a b-matching solved exactly by successive shortest paths.
Choice min_cost_flow(const OffloadGraph& g, double bonus) {
  struct Arc {
    std::size_t to;
    long cap;
    double cost;
    std::size_t rev;
  };
  const std::size_t nf = g.flows.size();
  const std::size_t ns = g.switches.size();
  const std::size_t src = 0;
  const std::size_t sink = nf + ns + 1;
  std::vector<std::vector<Arc>> adj(nf + ns + 2);
  auto add = [&](std::size_t u, std::size_t v, long cap, double cost) {
    adj[u].push_back({v, cap, cost, adj[v].size()});
    adj[v].push_back({u, 0, -cost, adj[u].size() - 1});
  };
  const double rate = nf > 0 ? g.flows.front().rate_bps : 0.0;
  for (std::size_t f = 0; f < nf; ++f) add(src, 1 + f, 1, 0.0);
  for (const auto& e : g.edges) {
    add(1 + e.flow, 1 + nf + e.sw, 1, -(e.weight + bonus));
  }
  for (std::size_t s = 0; s < ns; ++s) {
    const double rem = g.switches[s].remaining_capacity_bps();
    long slots = rate > 0.0 ? static_cast<long>(std::floor(rem / rate + 1e-9))
                            : static_cast<long>(nf);
    slots = std::clamp<long>(slots, 0, static_cast<long>(nf));
    add(1 + nf + s, sink, slots, 0.0);
  }
  const std::size_t n = adj.size();
  while (true) {
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::pair<std::size_t, std::size_t>> prev(n, {kNone, kNone});
    dist[src] = 0.0;
    for (std::size_t round = 0; round + 1 < n; ++round) {
      bool changed = false;
      for (std::size_t u = 0; u < n; ++u) {
        if (!std::isfinite(dist[u])) continue;
        for (std::size_t a = 0; a < adj[u].size(); ++a) {
          const Arc& arc = adj[u][a];
          if (arc.cap > 0 && dist[u] + arc.cost < dist[arc.to] - 1e-12) {
            dist[arc.to] = dist[u] + arc.cost;
            prev[arc.to] = {u, a};
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (!(dist[sink] < -1e-12)) break;
    for (std::size_t v = sink; v != src;) {
      auto [u, a] = prev[v];
      adj[u][a].cap -= 1;
      adj[v][adj[u][a].rev].cap += 1;
      v = u;
    }
  }
  Choice choice(nf, kNone);
  for (std::size_t f = 0; f < nf; ++f) {
    for (const Arc& arc : adj[1 + f]) {
      if (arc.to > nf && arc.to <= nf + ns && arc.cap == 0) {
        choice[f] = arc.to - 1 - nf;
      }
    }
  }
  return choice;
}

bool equal_rates(const OffloadGraph& g) {
  for (const auto& f : g.flows) {
    if (f.rate_bps != g.flows.front().rate_bps) return false;
  }
  return true;
}

}  // namespace

FlowAssignment max_weight_assignment(const OffloadGraph& graph,
                                     const SolverConfig& config) {
  graph.validate();
  const double bonus = config.cardinality_bonus;
  if (graph.flows.empty() || graph.edges.empty()) {
    return to_result(graph, Choice(graph.flows.size(), kNone),
                     SolverKind::kBranchAndBound, true);
  }
  if (equal_rates(graph)) {
    return to_result(graph, min_cost_flow(graph, bonus),
                     SolverKind::kMinCostFlow, true);
  }
  Choice fallback = greedy(graph, bonus);
  if (graph.edges.size() > config.edge_budget) {
    return to_result(graph, fallback, SolverKind::kGreedy, false);
  }
  BranchAndBound bb(graph, config);
  const bool complete = bb.run(std::move(fallback));
  return to_result(graph, bb.best(),
                   complete ? SolverKind::kBranchAndBound : SolverKind::kGreedy,
                   complete);
}

RebalancePlan rebalance(const std::vector<SwitchProfile>& switches,
                        const std::vector<ActiveFlow>& active, SwitchId trigger,
                        const WeightCoefficients& coeffs,
                        const SolverConfig& config) {
  RebalancePlan plan;
  auto trig = std::find_if(switches.begin(), switches.end(),
                           [&](const SwitchProfile& s) { return s.id == trigger; });
  if (trig == switches.end()) {
    throw InvariantError("rebalance: unknown trigger switch");
  }
  plan.trigger_load_after_bps = trig->current_load_bps;
  if (trig->current_load_bps <= trig->service_capacity_bps) return plan;

  std::vector<Flow> flows;
  double own = 0.0;
  for (const auto& a : active) {
    if (a.on == trigger) {
      flows.push_back(a.flow);
      own += a.flow.rate_bps;
    }
  }
  const double background = trig->current_load_bps - own;
  std::vector<SwitchProfile> candidates;
  SwitchProfile self = *trig;
  self.current_load_bps = background;
  candidates.push_back(self);
  for (const auto& s : switches) {
    if (s.id != trigger && s.current_load_bps < s.service_capacity_bps) {
      candidates.push_back(s);
    }
  }
  SolverConfig cfg = config;
  // Keeping every flow placed matters more than the weight of any one edge.
  cfg.cardinality_bonus = std::max(cfg.cardinality_bonus, 1e6);
  const auto assignment = max_weight_assignment(
      OffloadGraph::build(flows, candidates, coeffs), cfg);

  double after = background;
  for (const auto& f : flows) {
    const auto to = assignment.switch_of(f.id);
    if (!to) {
      plan.residual.push_back(f.id);
      after += f.rate_bps;
    } else if (*to == trigger) {
      after += f.rate_bps;
    } else {
      plan.migrations.push_back({f.id, trigger, *to});
    }
  }
  plan.trigger_load_after_bps = after;
  plan.complete = plan.residual.empty() && after <= trig->service_capacity_bps;
  return plan;
}

void write_migration_header(std::ostream& os) {
  os << "time,flow_id,from_switch,to_switch,reason\n";
}

void write_migration_row(std::ostream& os, double time_s, const Migration& m,
                         std::string_view reason) {
  os << time_s << ',' << m.flow.value << ',' << m.from.value << ','
     << m.to.value << ',' << reason << '\n';
}

}  // namespace ts3ra::offload
