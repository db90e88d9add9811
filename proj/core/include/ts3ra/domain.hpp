#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ts3ra {

/// Thrown when a caller violates a documented precondition or a value
/// object is constructed outside its invariants.
class InvariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Tag>
struct Id {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(const Id&, const Id&) = default;
};

using DeviceId = Id<struct DeviceTag>;
using FlowId = Id<struct FlowTag>;
using SwitchId = Id<struct SwitchTag>;

// Service classes. The numeric value is also the slice index (S1, S2, S3).
enum class ServiceType : std::uint8_t { kEmbb = 0, kUrllc = 1, kMmtc = 2 };

inline constexpr std::array<ServiceType, 3> kAllServiceTypes = {
    ServiceType::kEmbb, ServiceType::kUrllc, ServiceType::kMmtc};

using Indicator = std::array<std::uint8_t, 3>;

constexpr std::size_t slice_index(ServiceType s) {
  return static_cast<std::size_t>(s);
}
ServiceType service_from_index(std::size_t index);

std::string_view service_name(ServiceType s);  // "eMBB", "URLLC", "mMTC"
std::string_view slice_label(ServiceType s);   // "S1", "S2", "S3"
std::optional<ServiceType> parse_service(std::string_view text);

/// Slice-selection indicator per service (eMBB (0,0,1), URLLC (0,1,0),
/// mMTC (1,1,1)).
Indicator indicator_of(ServiceType s);
std::optional<ServiceType> service_of_indicator(const Indicator& code);

struct QoSProfile {
  double peak_throughput_bps = 0.0;
  double min_bandwidth_bps = 0.0;
  std::optional<double> latency_bound_s;
  std::optional<double> reliability;
  std::optional<double> connection_density;

  void validate() const;
};

QoSProfile qos_profile_of(ServiceType s);

struct SlaRatios {
  double sar = 0.0;  // service availability
  double rtr = 0.0;  // response time
  double tr = 0.0;   // throughput
  double srr = 0.0;  // service reliability

  /// Clips every component into [0, 1].
  static SlaRatios clipped(double sar, double rtr, double tr, double srr);
  friend bool operator==(const SlaRatios&, const SlaRatios&) = default;
};

/// What a slice actually delivered over an observation period.
struct QosMeasurement {
  double availability = 0.0;    // fraction of time the service was reachable
  double latency_s = 0.0;       // mean response latency
  double throughput_bps = 0.0;  // achieved rate
  double reliability = 0.0;     // delivered / sent
};

/// Agreed targets for the four SLA dimensions.
struct SlaTargets {
  double availability = 1.0;
  double latency_bound_s = 1.0;
  double throughput_bps = 1.0;
  double reliability = 1.0;
};

/// Targets for a service class: throughput from the profile's minimum
/// bandwidth, latency from its bound (or a class default when the profile
/// has none), reliability from the profile (default 0.99).
SlaTargets sla_targets_from(ServiceType s);

struct SlaEvaluation {
  SlaRatios ratios;
  bool degenerate = false;  // zero achieved latency against a finite bound
};

SlaEvaluation compute_sla_ratios(const QosMeasurement& achieved,
                                 const SlaTargets& agreed);
inline SlaEvaluation compute_sla_ratios(const QosMeasurement& achieved,
                                        ServiceType agreed) {
  return compute_sla_ratios(achieved, sla_targets_from(agreed));
}

/// Unweighted mean of the four ratios.
double fairness_weight(const SlaRatios& ratios);

struct Position {
  double x = 0.0;
  double y = 0.0;
};

struct Mobility {
  double speed_mps = 0.0;
  Position position;
  Position waypoint;
};

struct Device {
  DeviceId id;
  std::uint64_t imsi_hash = 0;
  ServiceType service = ServiceType::kEmbb;
  Mobility mobility;
  bool legitimate = true;  // ground truth, evaluation only
};

/// Stable 64-bit hash of a synthetic subscriber string (FNV-1a).
std::uint64_t imsi_hash(std::string_view subscriber);

struct SliceRequest {
  DeviceId origin;
  ServiceType service_type = ServiceType::kEmbb;
  std::uint32_t demand_slots = 1;
  double fair_sla = 1.0;
  double slice_capacity_hint_bps = 0.0;
  double arrival_time_s = 0.0;

  void validate() const;
};

enum class SwitchKind : std::uint8_t { kPhysical, kVirtual };

struct SwitchProfile {
  SwitchId id;
  SwitchKind kind = SwitchKind::kPhysical;
  double service_capacity_bps = 0.0;
  double transmission_rate_bps = 0.0;
  double loss_rate = 0.0;
  double current_load_bps = 0.0;

  double remaining_capacity_bps() const {
    return service_capacity_bps - current_load_bps;
  }
  void validate() const;
};

enum class Protocol : std::uint8_t { kReliableStream, kDatagram };

struct Flow {
  FlowId id;
  DeviceId origin;
  ServiceType slice = ServiceType::kEmbb;
  double rate_bps = 0.0;
  double packet_delay_s = 0.0;  // delay bound the flow asks for
  std::uint32_t packet_length_bytes = 512;
  Protocol protocol = Protocol::kReliableStream;

  void validate() const;
};

}  // namespace ts3ra

template <typename Tag>
struct std::hash<ts3ra::Id<Tag>> {
  std::size_t operator()(const ts3ra::Id<Tag>& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
