#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "ts3ra/domain.hpp"
#include "ts3ra/rng.hpp"
#include "ts3ra/scenario.hpp"
#include "ts3ra/slicenet.hpp"

namespace ts3ra::engine {

/// Simulation time in integer microseconds.
using Micros = std::int64_t;
Micros to_micros(double seconds);
double to_seconds(Micros t);

/// Declaration order is the tie-break rank for events at the same instant.
enum class EventKind : std::uint8_t {
  kMobilityTick,
  kWindowClose,
  kRebalance,
  kFloodStart,
  kArrival,
  kAuth,
  kScheduleSlot,
  kSliceDecide,
  kAllocate,
  kTransmit,
  kForward,
  kSwitchDone,
  kDeliver,
  kDrop,
};
std::string_view event_kind_name(EventKind k);

struct SliceMetrics {
  double throughput_bps = 0.0;
  double latency_s = 0.0;
  double response_time_s = 0.0;
  double ptr = 0.0;
  double plr = 0.0;
  double capacity_utilization = 0.0;
  double bandwidth_bits = 0.0;
  double acceptance_ratio = 0.0;
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t requests = 0;
  std::uint64_t granted = 0;
  bool degenerate = false;  // nothing sent, ratios reported as 0
};

struct GlobalCounters {
  std::uint64_t events = 0;
  std::uint64_t auth_attempts = 0;
  std::uint64_t auth_rejections = 0;
  std::uint64_t quarantined_devices = 0;
  std::uint64_t quarantined_illegitimate = 0;
  std::uint64_t attack_windows = 0;
  std::uint64_t migrations = 0;
  std::uint64_t misrouted_decisions = 0;  // decided slice != requested
  std::uint64_t flood_packets = 0;
  std::uint64_t illegitimate_deliveries = 0;
  std::uint64_t unauthenticated_deliveries = 0;
};

struct MetricsReport {
  std::array<SliceMetrics, 3> slices{};
  SliceMetrics total;
  GlobalCounters global;
};

/// Raw per-slice tallies a run accumulates; `collect_metrics` derives the
/// reported ratios from them.
struct SliceCounters {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t requests = 0;
  std::uint64_t granted = 0;
  double delivered_bits = 0.0;
  double latency_sum_s = 0.0;
  double response_sum_s = 0.0;
  std::uint64_t responses = 0;
  double bandwidth_bits = 0.0;
};

MetricsReport collect_metrics(const std::array<SliceCounters, 3>& counters,
                              double duration_s, double network_capacity_bps);

/// Columns: slice, throughput_bps, latency_s, response_time_s, ptr, plr,
/// capacity_utilization, bandwidth_bits, acceptance_ratio, sent, delivered,
/// dropped, in_flight, requests, granted. Rows S1, S2, S3, TOTAL.
void write_metrics_csv(std::ostream& os, const MetricsReport& report);
inline constexpr std::string_view kMetricsHeader =
    "slice,throughput_bps,latency_s,response_time_s,ptr,plr,"
    "capacity_utilization,bandwidth_bits,acceptance_ratio,sent,delivered,"
    "dropped,in_flight,requests,granted";

/// Random waypoint: moves toward the waypoint at the device speed and draws
/// a fresh uniform waypoint on arrival. Positions stay inside the area.
void mobility_step(Mobility& m, double dt, double width, double height,
                   Rng& rng);

struct RunOptions {
  std::ostream* trace = nullptr;       // time,kind,device,slice,switch,outcome
  std::ostream* detection = nullptr;   // one row per closed window per switch
  std::ostream* migrations = nullptr;  // one row per migrated flow
  std::vector<std::ostream*> scheduler_traces;  // one per access point
  /// Slice selector to use; when absent one is loaded from the scenario's
  /// model path or trained from the run seed.
  std::optional<slicenet::SliceNet> model;
};

struct RunResult {
  MetricsReport metrics;
  std::uint64_t sent_total = 0;  // all packets including illegitimate ones
};

/// Builds the slice selector a scenario asks for (load or train).
slicenet::SliceNet prepare_model(const Scenario& scenario);

/// Throws InvariantError for an invalid scenario before any event runs.
RunResult run_scenario(const Scenario& scenario, RunOptions options = {});

}  // namespace ts3ra::engine
