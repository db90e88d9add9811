#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ts3ra/auth.hpp"
#include "ts3ra/domain.hpp"

namespace ts3ra {

struct NetworkSettings {
  std::uint64_t seed = 1;
  double area_width_m = 1000.0;
  double area_height_m = 1000.0;
  double duration_s = 300.0;
  std::int64_t devices = 250;
  double illegitimate_fraction = 0.05;
  std::int64_t access_points = 2;
  std::int64_t physical_switches = 3;
  std::int64_t virtual_switches = 5;
  double physical_capacity_bps = 4e6;
  double virtual_capacity_bps = 2e6;
  double physical_loss = 0.02;
  double virtual_loss = 0.12;
  std::int64_t switch_buffer = 64;
  std::int64_t local_controllers = 3;
  std::int64_t global_controllers = 1;
  double processing_latency_s = 10e-6;
  std::int64_t devices_per_authority = 125;
  double pool_communication_bps = 22e6;
  double pool_computation = 200.0;
  double pool_caching = 200.0;
  double hopfield_kappa = 0.0;
};

struct FlowSettings {
  double mix_embb = 0.4;
  double mix_urllc = 0.3;
  double mix_mmtc = 0.3;
  std::int64_t demand_embb_min = 30;
  std::int64_t demand_embb_max = 54;
  std::int64_t demand_urllc_min = 16;
  std::int64_t demand_urllc_max = 32;
  std::int64_t demand_mmtc_min = 26;
  std::int64_t demand_mmtc_max = 46;
  double session_gap_s = 5.0;
  double flood_start_s = 15.0;
};

struct MobilitySettings {
  double speed_min_mps = 0.5;
  double speed_max_mps = 5.0;
  double tick_s = 0.1;
};

struct PacketSettings {
  std::int64_t packet_length_bytes = 512;
  double packet_interval_s = 0.1;
  double bit_rate_bps = 2e6;
};

struct ProtocolSettings {
  bool retransmit = true;
  double retransmit_timeout_s = 0.02;
};

struct SliceNetSettings {
  std::string model_path;  // empty: train a fresh model at start-up
  std::int64_t train_samples = 300;
  std::int64_t epochs = 4;
  double learning_rate = 0.01;
};

struct SchedulerSettings {
  double mu1 = 0.7;
  double mu2 = 0.3;
  double delta = 0.75;
  std::int64_t steps_per_service = 1;
  double continue_prob = 0.9;
  std::int64_t hp_capacity = 1000;
  std::int64_t lp_capacity = 1000;
  double slot_s = 0.5e-3;
};

struct OffloadSettings {
  bool enabled = true;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double gamma_urllc = 10.0;
  double rebalance_interval_s = 0.1;
  std::int64_t edge_budget = 1000;
};

struct DdosSettings {
  bool enabled = true;
  double renyi_alpha = 2.0;
  double k_sigma = 3.0;
  std::int64_t min_packets = 30;
  double window_s = 1.0;
  std::int64_t baseline_windows = 10;
  double sigma_floor_bits = 0.05;
  double dominance = 3.0;
  double ewma_lambda = 0.3;
};

struct Scenario {
  NetworkSettings network;
  FlowSettings flows;
  MobilitySettings mobility;
  PacketSettings packets;
  ProtocolSettings protocol;
  SliceNetSettings slicenet;
  SchedulerSettings scheduler;
  OffloadSettings offload;
  DdosSettings ddos;
  std::vector<auth::RegistrationRecord> registrations;

  /// Cross-field checks; throws ScenarioError naming a key.
  void validate() const;
  friend bool operator==(const Scenario&, const Scenario&);
};

class ScenarioError : public InvariantError {
 public:
  ScenarioError(std::string key, std::size_t line, const std::string& what);
  const std::string& key() const { return key_; }
  std::size_t line() const { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

/// `key = value` lines, optional `[section]` headers and `#` comments.
/// Missing keys keep their defaults; unknown keys, type mismatches and
/// invariant violations raise ScenarioError naming the key and line.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario_file(const std::string& path);

/// Canonical document listing every key.
std::string serialize_scenario(const Scenario& s);

/// Applies a single `key = value` override (used by sweeps).
void set_scenario_value(Scenario& s, std::string_view key,
                        std::string_view value);
std::vector<std::string> scenario_keys();

}  // namespace ts3ra
