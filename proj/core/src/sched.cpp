#include "ts3ra/sched.hpp"

#include <cmath>

namespace ts3ra::sched {

QueueClass classify_flow(const Flow& flow) {
  if (flow.slice == ServiceType::kUrllc) return QueueClass::kHigh;
  return flow.packet_delay_s < kInelasticDelayBound ? QueueClass::kHigh
                                                    : QueueClass::kLow;
}

void validate_config(const SchedulerConfig& c) {
  if (!(c.mu1 > 0.0 && c.mu1 < 1.0) || !(c.mu2 > 0.0 && c.mu2 < 1.0)) {
    throw ConfigError("scheduler: mu1 and mu2 must lie in (0, 1)");
  }
  if (std::abs(c.mu1 + c.mu2 - 1.0) > 1e-9) {
    throw ConfigError("scheduler: mu1 + mu2 must equal 1");
  }
  if (!(c.delta > 0.0 && c.delta <= 1.0)) {
    throw ConfigError("scheduler: delta must lie in (0, 1]");
  }
  if (c.steps_per_service < 1) {
    throw ConfigError("scheduler: steps_per_service must be >= 1");
  }
  if (!(c.continue_prob >= 0.0 && c.continue_prob <= 1.0)) {
    throw ConfigError("scheduler: continue_prob must lie in [0, 1]");
  }
  if (c.hp_capacity < 1 || c.lp_capacity < 1) {
    throw ConfigError("scheduler: queue capacities must be >= 1");
  }
}

std::string_view decision_name(Decision d) {
  switch (d) {
    case Decision::kServeHp: return "serve_hp";
    case Decision::kServeLp: return "serve_lp";
    case Decision::kIdle: return "idle";
  }
  return "?";
}

void write_trace_header(std::ostream& os) {
  os << "slot,decision,hp_len,lp_len,gamma\n";
}

void write_trace_row(std::ostream& os, const SlotRecord& r) {
  os << r.slot << ',' << decision_name(r.decision) << ',' << r.hp_len << ','
     << r.lp_len << ',' << r.gamma.value() << '\n';
}

}  // namespace ts3ra::sched
