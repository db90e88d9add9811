#include "ts3ra/scenario.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ts3ra/sched.hpp"

namespace ts3ra {

ScenarioError::ScenarioError(std::string key, std::size_t line,
                             const std::string& what)
    : InvariantError(line > 0 ? "line " + std::to_string(line) + ": key '" +
                                    key + "': " + what
                              : "key '" + key + "': " + what),
      key_(std::move(key)),
      line_(line) {}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view v) {
  double out = 0.0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::int64_t parse_int(std::string_view v) {
  std::int64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t parse_uint(std::string_view v) {
  std::uint64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" +
                                std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(v) + "'");
}

using Check = std::function<const char*(double)>;

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const Scenario&)> get;
  std::function<void(Scenario&, std::string_view)> set;
};

const char* positive(double v) { return v > 0.0 ? nullptr : "must be > 0"; }
const char* non_negative(double v) { return v >= 0.0 ? nullptr : "must be >= 0"; }
const char* probability(double v) {
  return v >= 0.0 && v <= 1.0 ? nullptr : "must lie in [0, 1]";
}
const char* half_open_unit(double v) {
  return v >= 0.0 && v < 1.0 ? nullptr : "must lie in [0, 1)";
}
const char* at_least_one(double v) { return v >= 1.0 ? nullptr : "must be >= 1"; }
const char* any(double) { return nullptr; }

template <typename Ref>
Field make_double(std::string section, std::string key, Ref ref, Check check) {
  return {std::move(section), std::move(key),
          [ref](const Scenario& s) { return fmt_double(ref(const_cast<Scenario&>(s))); },
          [ref, check](Scenario& s, std::string_view v) {
            const double d = parse_double(v);
            if (const char* err = check(d)) throw InvariantError(err);
            ref(s) = d;
          }};
}

template <typename Ref>
Field make_int(std::string section, std::string key, Ref ref, Check check) {
  return {std::move(section), std::move(key),
          [ref](const Scenario& s) { return std::to_string(ref(const_cast<Scenario&>(s))); },
          [ref, check](Scenario& s, std::string_view v) {
            const std::int64_t i = parse_int(v);
            if (const char* err = check(static_cast<double>(i))) throw InvariantError(err);
            ref(s) = i;
          }};
}

template <typename Ref>
Field make_bool(std::string section, std::string key, Ref ref) {
  return {std::move(section), std::move(key),
          [ref](const Scenario& s) {
            return std::string(ref(const_cast<Scenario&>(s)) ? "true" : "false");
          },
          [ref](Scenario& s, std::string_view v) { ref(s) = parse_bool(v); }};
}

#define TS3RA_REF(path) [](Scenario& s) -> auto& { return s.path; }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    // network
    v.push_back({"network", "seed",
                 [](const Scenario& s) { return std::to_string(s.network.seed); },
                 [](Scenario& s, std::string_view x) { s.network.seed = parse_uint(x); }});
    v.push_back(make_double("network", "area_width", TS3RA_REF(network.area_width_m), positive));
    v.push_back(make_double("network", "area_height", TS3RA_REF(network.area_height_m), positive));
    v.push_back(make_double("network", "duration", TS3RA_REF(network.duration_s), positive));
    v.push_back(make_int("network", "devices", TS3RA_REF(network.devices), non_negative));
    v.push_back(make_double("network", "illegitimate_fraction",
                            TS3RA_REF(network.illegitimate_fraction), half_open_unit));
    v.push_back(make_int("network", "access_points", TS3RA_REF(network.access_points), at_least_one));
    v.push_back(make_int("network", "physical_switches", TS3RA_REF(network.physical_switches), non_negative));
    v.push_back(make_int("network", "virtual_switches", TS3RA_REF(network.virtual_switches), non_negative));
    v.push_back(make_double("network", "physical_capacity", TS3RA_REF(network.physical_capacity_bps), positive));
    v.push_back(make_double("network", "virtual_capacity", TS3RA_REF(network.virtual_capacity_bps), positive));
    v.push_back(make_double("network", "physical_loss", TS3RA_REF(network.physical_loss), probability));
    v.push_back(make_double("network", "virtual_loss", TS3RA_REF(network.virtual_loss), probability));
    v.push_back(make_int("network", "switch_buffer", TS3RA_REF(network.switch_buffer), at_least_one));
    v.push_back(make_int("network", "local_controllers", TS3RA_REF(network.local_controllers), at_least_one));
    v.push_back(make_int("network", "global_controllers", TS3RA_REF(network.global_controllers), at_least_one));
    v.push_back(make_double("network", "processing_latency", TS3RA_REF(network.processing_latency_s), non_negative));
    v.push_back(make_int("network", "devices_per_authority", TS3RA_REF(network.devices_per_authority), at_least_one));
    v.push_back(make_double("network", "pool_communication", TS3RA_REF(network.pool_communication_bps), non_negative));
    v.push_back(make_double("network", "pool_computation", TS3RA_REF(network.pool_computation), non_negative));
    v.push_back(make_double("network", "pool_caching", TS3RA_REF(network.pool_caching), non_negative));
    v.push_back(make_double("network", "hopfield_kappa", TS3RA_REF(network.hopfield_kappa), any));
    // flows
    v.push_back(make_double("flows", "mix_embb", TS3RA_REF(flows.mix_embb), probability));
    v.push_back(make_double("flows", "mix_urllc", TS3RA_REF(flows.mix_urllc), probability));
    v.push_back(make_double("flows", "mix_mmtc", TS3RA_REF(flows.mix_mmtc), probability));
    v.push_back(make_int("flows", "demand_embb_min", TS3RA_REF(flows.demand_embb_min), at_least_one));
    v.push_back(make_int("flows", "demand_embb_max", TS3RA_REF(flows.demand_embb_max), at_least_one));
    v.push_back(make_int("flows", "demand_urllc_min", TS3RA_REF(flows.demand_urllc_min), at_least_one));
    v.push_back(make_int("flows", "demand_urllc_max", TS3RA_REF(flows.demand_urllc_max), at_least_one));
    v.push_back(make_int("flows", "demand_mmtc_min", TS3RA_REF(flows.demand_mmtc_min), at_least_one));
    v.push_back(make_int("flows", "demand_mmtc_max", TS3RA_REF(flows.demand_mmtc_max), at_least_one));
    v.push_back(make_double("flows", "session_gap", TS3RA_REF(flows.session_gap_s), positive));
    v.push_back(make_double("flows", "flood_start", TS3RA_REF(flows.flood_start_s), non_negative));
    // mobility
    v.push_back(make_double("mobility", "speed_min", TS3RA_REF(mobility.speed_min_mps), non_negative));
    v.push_back(make_double("mobility", "speed_max", TS3RA_REF(mobility.speed_max_mps), non_negative));
    v.push_back(make_double("mobility", "mobility_tick", TS3RA_REF(mobility.tick_s), positive));
    // packets
    v.push_back(make_int("packets", "packet_length", TS3RA_REF(packets.packet_length_bytes), at_least_one));
    v.push_back(make_double("packets", "packet_interval", TS3RA_REF(packets.packet_interval_s), positive));
    v.push_back(make_double("packets", "bit_rate", TS3RA_REF(packets.bit_rate_bps), positive));
    // protocol
    v.push_back(make_bool("protocol", "retransmit", TS3RA_REF(protocol.retransmit)));
    v.push_back(make_double("protocol", "retransmit_timeout", TS3RA_REF(protocol.retransmit_timeout_s), non_negative));
    // slicenet
    v.push_back({"slicenet", "slicenet_model",
                 [](const Scenario& s) { return s.slicenet.model_path; },
                 [](Scenario& s, std::string_view x) { s.slicenet.model_path = std::string(x); }});
    v.push_back(make_int("slicenet", "slicenet_train_samples", TS3RA_REF(slicenet.train_samples), at_least_one));
    v.push_back(make_int("slicenet", "slicenet_epochs", TS3RA_REF(slicenet.epochs), non_negative));
    v.push_back(make_double("slicenet", "slicenet_lr", TS3RA_REF(slicenet.learning_rate), [](double x) -> const char* {
      return x >= 0.001 && x <= 0.1 ? nullptr : "must lie in [0.001, 0.1]";
    }));
    // scheduler
    v.push_back(make_double("scheduler", "mu1", TS3RA_REF(scheduler.mu1), probability));
    v.push_back(make_double("scheduler", "mu2", TS3RA_REF(scheduler.mu2), probability));
    v.push_back(make_double("scheduler", "delta", TS3RA_REF(scheduler.delta), probability));
    v.push_back(make_int("scheduler", "steps_per_service", TS3RA_REF(scheduler.steps_per_service), at_least_one));
    v.push_back(make_double("scheduler", "continue_prob", TS3RA_REF(scheduler.continue_prob), probability));
    v.push_back(make_int("scheduler", "hp_capacity", TS3RA_REF(scheduler.hp_capacity), at_least_one));
    v.push_back(make_int("scheduler", "lp_capacity", TS3RA_REF(scheduler.lp_capacity), at_least_one));
    v.push_back(make_double("scheduler", "ap_slot", TS3RA_REF(scheduler.slot_s), positive));
    // offload
    v.push_back(make_bool("offload", "offload_enabled", TS3RA_REF(offload.enabled)));
    v.push_back(make_double("offload", "offload_alpha", TS3RA_REF(offload.alpha), any));
    v.push_back(make_double("offload", "offload_beta", TS3RA_REF(offload.beta), any));
    v.push_back(make_double("offload", "offload_gamma", TS3RA_REF(offload.gamma), any));
    v.push_back(make_double("offload", "offload_gamma_urllc", TS3RA_REF(offload.gamma_urllc), any));
    v.push_back(make_double("offload", "rebalance_interval", TS3RA_REF(offload.rebalance_interval_s), positive));
    v.push_back(make_int("offload", "offload_edge_budget", TS3RA_REF(offload.edge_budget), at_least_one));
    // ddos
    v.push_back(make_bool("ddos", "ddos_enabled", TS3RA_REF(ddos.enabled)));
    v.push_back(make_double("ddos", "renyi_alpha", TS3RA_REF(ddos.renyi_alpha), [](double x) -> const char* {
      return x > 0.0 && x != 1.0 ? nullptr : "must be > 0 and != 1";
    }));
    v.push_back(make_double("ddos", "k_sigma", TS3RA_REF(ddos.k_sigma), non_negative));
    v.push_back(make_int("ddos", "min_packets", TS3RA_REF(ddos.min_packets), at_least_one));
    v.push_back(make_double("ddos", "ddos_window", TS3RA_REF(ddos.window_s), positive));
    v.push_back(make_int("ddos", "baseline_windows", TS3RA_REF(ddos.baseline_windows), at_least_one));
    v.push_back(make_double("ddos", "sigma_floor", TS3RA_REF(ddos.sigma_floor_bits), non_negative));
    v.push_back(make_double("ddos", "dominance", TS3RA_REF(ddos.dominance), positive));
    v.push_back(make_double("ddos", "ewma_lambda", TS3RA_REF(ddos.ewma_lambda), [](double x) -> const char* {
      return x > 0.0 && x <= 1.0 ? nullptr : "must lie in (0, 1]";
    }));
    return v;
  }();
  return f;
}

#undef TS3RA_REF

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

const std::set<std::string>& sections() {
  static const std::set<std::string> s = {
      "network", "flows",     "mobility", "packets", "protocol",
      "slicenet", "scheduler", "offload", "ddos",    "registrations"};
  return s;
}

void cross_validate(const Scenario& s,
                    const std::map<std::string, std::size_t>& lines) {
  auto fail = [&](const std::string& key, const std::string& what) {
    auto it = lines.find(key);
    throw ScenarioError(key, it == lines.end() ? 0 : it->second, what);
  };
  if (s.network.physical_switches + s.network.virtual_switches < 1) {
    fail("physical_switches", "at least one switch is required");
  }
  const double mix = s.flows.mix_embb + s.flows.mix_urllc + s.flows.mix_mmtc;
  if (std::abs(mix - 1.0) > 1e-9) fail("mix_mmtc", "service mix must sum to 1");
  if (s.flows.demand_embb_min > s.flows.demand_embb_max) {
    fail("demand_embb_max", "must be >= demand_embb_min");
  }
  if (s.flows.demand_urllc_min > s.flows.demand_urllc_max) {
    fail("demand_urllc_max", "must be >= demand_urllc_min");
  }
  if (s.flows.demand_mmtc_min > s.flows.demand_mmtc_max) {
    fail("demand_mmtc_max", "must be >= demand_mmtc_min");
  }
  if (s.mobility.speed_min_mps > s.mobility.speed_max_mps) {
    fail("speed_max", "must be >= speed_min");
  }
  try {
    sched::validate_config({s.scheduler.mu1, s.scheduler.mu2, s.scheduler.delta,
                            static_cast<std::uint32_t>(s.scheduler.steps_per_service),
                            s.scheduler.continue_prob,
                            static_cast<std::size_t>(s.scheduler.hp_capacity),
                            static_cast<std::size_t>(s.scheduler.lp_capacity)});
  } catch (const sched::ConfigError& e) {
    fail("mu2", e.what());
  }
  std::set<std::uint32_t> ids;
  for (const auto& r : s.registrations) {
    if (r.device.value >= static_cast<std::uint64_t>(s.network.devices)) {
      fail(std::to_string(r.device.value), "registration for a device outside the roster");
    }
    if (!ids.insert(r.device.value).second) {
      fail(std::to_string(r.device.value), "duplicate registration");
    }
  }
}

}  // namespace

void Scenario::validate() const { cross_validate(*this, {}); }

bool operator==(const Scenario& a, const Scenario& b) {
  for (const auto& f : fields()) {
    if (f.get(a) != f.get(b)) return false;
  }
  return a.registrations == b.registrations;
}

Scenario parse_scenario(std::string_view text) {
  Scenario s;
  std::map<std::string, std::size_t> seen;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ScenarioError(line, line_no, "malformed section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!sections().contains(section)) {
        throw ScenarioError(section, line_no, "unknown section");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ScenarioError(line, line_no, "expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section == "registrations") {
      try {
        s.registrations.push_back(auth::RegistrationRecord::parse_line(line));
      } catch (const std::exception& e) {
        throw ScenarioError(key, line_no, e.what());
      }
      seen["registration:" + key] = line_no;
      continue;
    }
    const Field* f = find_field(key);
    if (f == nullptr) throw ScenarioError(key, line_no, "unknown key");
    if (!section.empty() && f->section != section) {
      throw ScenarioError(key, line_no,
                          "belongs to section [" + f->section + "], not [" + section + "]");
    }
    if (!seen.emplace(key, line_no).second) {
      throw ScenarioError(key, line_no, "duplicate key");
    }
    try {
      f->set(s, value);
    } catch (const std::exception& e) {
      throw ScenarioError(key, line_no, e.what());
    }
  }
  cross_validate(s, seen);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << f.key << " = " << f.get(s) << '\n';
  }
  if (!s.registrations.empty()) {
    os << "\n[registrations]\n";
    for (const auto& r : s.registrations) os << r.to_line() << '\n';
  }
  return os.str();
}

void set_scenario_value(Scenario& s, std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ScenarioError(std::string(key), 0, "unknown key");
  try {
    f->set(s, value);
  } catch (const std::exception& e) {
    throw ScenarioError(std::string(key), 0, e.what());
  }
  std::map<std::string, std::size_t> where{{std::string(key), 0}};
  cross_validate(s, where);
}

std::vector<std::string> scenario_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

}  // namespace ts3ra
