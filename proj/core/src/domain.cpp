#include "ts3ra/domain.hpp"

#include <algorithm>
#include <cmath>

namespace ts3ra {

namespace {

double clip01(double v) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

ServiceType service_from_index(std::size_t index) {
  if (index >= kAllServiceTypes.size()) {
    throw InvariantError("service index out of range: " +
                         std::to_string(index));
  }
  return kAllServiceTypes[index];
}

std::string_view service_name(ServiceType s) {
  switch (s) {
    case ServiceType::kEmbb: return "eMBB";
    case ServiceType::kUrllc: return "URLLC";
    case ServiceType::kMmtc: return "mMTC";
  }
  return "?";
}

std::string_view slice_label(ServiceType s) {
  switch (s) {
    case ServiceType::kEmbb: return "S1";
    case ServiceType::kUrllc: return "S2";
    case ServiceType::kMmtc: return "S3";
  }
  return "?";
}

std::optional<ServiceType> parse_service(std::string_view text) {
  for (ServiceType s : kAllServiceTypes) {
    if (text == service_name(s) || text == slice_label(s)) return s;
  }
  if (text == "embb") return ServiceType::kEmbb;
  if (text == "urllc") return ServiceType::kUrllc;
  if (text == "mmtc") return ServiceType::kMmtc;
  return std::nullopt;
}

Indicator indicator_of(ServiceType s) {
  switch (s) {
    case ServiceType::kEmbb: return {0, 0, 1};
    case ServiceType::kUrllc: return {0, 1, 0};
    case ServiceType::kMmtc: return {1, 1, 1};
  }
  return {0, 0, 0};
}

std::optional<ServiceType> service_of_indicator(const Indicator& code) {
  for (ServiceType s : kAllServiceTypes) {
    if (indicator_of(s) == code) return s;
  }
  return std::nullopt;
}

void QoSProfile::validate() const {
  if (!(min_bandwidth_bps > 0.0)) {
    throw InvariantError("QoSProfile: min_bandwidth must be > 0");
  }
  if (latency_bound_s && !(*latency_bound_s > 0.0)) {
    throw InvariantError("QoSProfile: latency_bound must be > 0");
  }
  if (reliability && !(*reliability > 0.0 && *reliability <= 1.0)) {
    throw InvariantError("QoSProfile: reliability must lie in (0, 1]");
  }
}

QoSProfile qos_profile_of(ServiceType s) {
  QoSProfile p;
  switch (s) {
    case ServiceType::kEmbb:
      p.peak_throughput_bps = 20e9;
      p.min_bandwidth_bps = 100e3;
      break;
    case ServiceType::kUrllc:
      p.min_bandwidth_bps = 100e3;
      p.latency_bound_s = 1e-3;
      p.reliability = 1.0 - 1e-9;
      break;
    case ServiceType::kMmtc:
      p.min_bandwidth_bps = 25e3;
      p.connection_density = 1e6;
      break;
  }
  return p;
}

SlaRatios SlaRatios::clipped(double sar, double rtr, double tr, double srr) {
  return {clip01(sar), clip01(rtr), clip01(tr), clip01(srr)};
}

SlaTargets sla_targets_from(ServiceType s) {
  const QoSProfile p = qos_profile_of(s);
  SlaTargets t;
  t.availability = 1.0;
  t.throughput_bps = p.min_bandwidth_bps;
  t.reliability = p.reliability.value_or(0.99);
  if (p.latency_bound_s) {
    t.latency_bound_s = *p.latency_bound_s;
  } else {
    t.latency_bound_s = s == ServiceType::kMmtc ? 1.0 : 10e-3;
  }
  return t;
}

SlaEvaluation compute_sla_ratios(const QosMeasurement& achieved,
                                 const SlaTargets& agreed) {
  if (!(agreed.availability > 0.0) || !(agreed.latency_bound_s > 0.0) ||
      !(agreed.throughput_bps > 0.0) || !(agreed.reliability > 0.0)) {
    throw InvariantError("compute_sla_ratios: agreed targets must be > 0");
  }
  SlaEvaluation out;
  double rtr = 1.0;
  if (achieved.latency_s > 0.0) {
    rtr = agreed.latency_bound_s / achieved.latency_s;
  } else {
    out.degenerate = true;
  }
  out.ratios = SlaRatios::clipped(achieved.availability / agreed.availability,
                                  rtr,
                                  achieved.throughput_bps / agreed.throughput_bps,
                                  achieved.reliability / agreed.reliability);
  return out;
}

double fairness_weight(const SlaRatios& r) {
  const SlaRatios c = SlaRatios::clipped(r.sar, r.rtr, r.tr, r.srr);
  return (c.sar + c.rtr + c.tr + c.srr) / 4.0;
}

std::uint64_t imsi_hash(std::string_view subscriber) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : subscriber) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void SliceRequest::validate() const {
  if (demand_slots < 1) throw InvariantError("SliceRequest: demand_slots < 1");
  if (!(fair_sla >= 0.0 && fair_sla <= 1.0)) {
    throw InvariantError("SliceRequest: fair_sla outside [0, 1]");
  }
}

void SwitchProfile::validate() const {
  if (current_load_bps < 0.0) {
    throw InvariantError("SwitchProfile: negative current_load");
  }
  if (!(loss_rate >= 0.0 && loss_rate <= 1.0)) {
    throw InvariantError("SwitchProfile: loss_rate outside [0, 1]");
  }
  if (transmission_rate_bps > service_capacity_bps) {
    throw InvariantError(
        "SwitchProfile: transmission_rate exceeds service_capacity");
  }
}

void Flow::validate() const {
  if (!(rate_bps > 0.0)) throw InvariantError("Flow: rate must be > 0");
  if (packet_length_bytes == 0) {
    throw InvariantError("Flow: packet_length must be > 0");
  }
}

}  // namespace ts3ra
