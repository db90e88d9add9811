#include "ts3ra/engine.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <queue>
#include <string>

#include "ts3ra/auth.hpp"
#include "ts3ra/ddos.hpp"
#include "ts3ra/hopfield.hpp"
#include "ts3ra/offload.hpp"
#include "ts3ra/sched.hpp"

namespace ts3ra::engine {

Micros to_micros(double seconds) {
  return static_cast<Micros>(std::llround(seconds * 1e6));
}
double to_seconds(Micros t) { return static_cast<double>(t) * 1e-6; }

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::kMobilityTick: return "mobility_tick";
    case EventKind::kWindowClose: return "window_close";
    case EventKind::kRebalance: return "rebalance";
    case EventKind::kFloodStart: return "flood_start";
    case EventKind::kArrival: return "arrival";
    case EventKind::kAuth: return "auth";
    case EventKind::kScheduleSlot: return "schedule_slot";
    case EventKind::kSliceDecide: return "slice_decide";
    case EventKind::kAllocate: return "allocate";
    case EventKind::kTransmit: return "transmit";
    case EventKind::kForward: return "forward";
    case EventKind::kSwitchDone: return "switch_done";
    case EventKind::kDeliver: return "deliver";
    case EventKind::kDrop: return "drop";
  }
  return "?";
}

// -- metrics -----------------------------------------------------------------

namespace {

SliceMetrics derive(const SliceCounters& c, double duration_s,
                    double capacity_bps) {
  SliceMetrics m;
  m.sent = c.sent;
  m.delivered = c.delivered;
  m.dropped = c.dropped;
  m.in_flight = c.sent - c.delivered - c.dropped;
  m.requests = c.requests;
  m.granted = c.granted;
  m.throughput_bps = duration_s > 0.0 ? c.delivered_bits / duration_s : 0.0;
  m.latency_s = c.delivered ? c.latency_sum_s / static_cast<double>(c.delivered) : 0.0;
  m.response_time_s =
      c.responses ? c.response_sum_s / static_cast<double>(c.responses) : 0.0;
  if (c.sent == 0) {
    m.degenerate = true;
  } else {
    m.ptr = static_cast<double>(c.delivered) / static_cast<double>(c.sent);
    m.plr = static_cast<double>(c.dropped) / static_cast<double>(c.sent);
  }
  m.bandwidth_bits = c.bandwidth_bits;
  const double budget = capacity_bps * duration_s;
  m.capacity_utilization = budget > 0.0 ? c.bandwidth_bits / budget : 0.0;
  m.acceptance_ratio =
      c.requests ? static_cast<double>(c.granted) / static_cast<double>(c.requests) : 0.0;
  return m;
}

}  // namespace

MetricsReport collect_metrics(const std::array<SliceCounters, 3>& counters,
                              double duration_s, double network_capacity_bps) {
  MetricsReport r;
  SliceCounters total;
  for (std::size_t i = 0; i < 3; ++i) {
    r.slices[i] = derive(counters[i], duration_s, network_capacity_bps);
    const auto& c = counters[i];
    total.sent += c.sent;
    total.delivered += c.delivered;
    total.dropped += c.dropped;
    total.requests += c.requests;
    total.granted += c.granted;
    total.delivered_bits += c.delivered_bits;
    total.latency_sum_s += c.latency_sum_s;
    total.response_sum_s += c.response_sum_s;
    total.responses += c.responses;
    total.bandwidth_bits += c.bandwidth_bits;
  }
  r.total = derive(total, duration_s, network_capacity_bps);
  return r;
}

void write_metrics_csv(std::ostream& os, const MetricsReport& report) {
  os << kMetricsHeader << '\n';
  auto row = [&](std::string_view label, const SliceMetrics& m) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%.*s,%.6f,%.9f,%.6f,%.6f,%.6f,%.6f,%.1f,%.6f,%" PRIu64 ",%" PRIu64
                  ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 "\n",
                  static_cast<int>(label.size()), label.data(), m.throughput_bps,
                  m.latency_s, m.response_time_s, m.ptr, m.plr,
                  m.capacity_utilization, m.bandwidth_bits, m.acceptance_ratio,
                  m.sent, m.delivered, m.dropped, m.in_flight, m.requests, m.granted);
    os << buf;
  };
  for (ServiceType s : kAllServiceTypes) row(slice_label(s), report.slices[slice_index(s)]);
  row("TOTAL", report.total);
}

// -- mobility ----------------------------------------------------------------

void mobility_step(Mobility& m, double dt, double width, double height, Rng& rng) {
  if (!(dt > 0.0)) throw InvariantError("mobility_step: dt must be > 0");
  if (m.speed_mps <= 0.0) return;
  double budget = m.speed_mps * dt;
  // At most one waypoint change per tick keeps the step bounded by speed*dt.
  for (int hop = 0; hop < 2 && budget > 0.0; ++hop) {
    const double dx = m.waypoint.x - m.position.x;
    const double dy = m.waypoint.y - m.position.y;
    const double dist = std::hypot(dx, dy);
    if (dist <= budget) {
      m.position = m.waypoint;
      budget -= dist;
      m.waypoint = {rng.uniform(0.0, width), rng.uniform(0.0, height)};
    } else {
      m.position.x += dx / dist * budget;
      m.position.y += dy / dist * budget;
      budget = 0.0;
    }
  }
  m.position.x = std::clamp(m.position.x, 0.0, width);
  m.position.y = std::clamp(m.position.y, 0.0, height);
}

// -- model -------------------------------------------------------------------

slicenet::SliceNet prepare_model(const Scenario& scenario) {
  if (!scenario.slicenet.model_path.empty()) {
    std::ifstream in(scenario.slicenet.model_path, std::ios::binary);
    if (!in) {
      throw std::runtime_error("cannot open SliceNet model: " +
                               scenario.slicenet.model_path);
    }
    return slicenet::SliceNet::load(in);
  }
  Rng rng = Rng(scenario.network.seed).split("slicenet");
  Rng init = rng.split("init");
  slicenet::SliceNet net(slicenet::SliceNetConfig{}, init);
  Rng data_rng = rng.split("data");
  const auto data = slicenet::synthetic_dataset(
      static_cast<std::size_t>(scenario.slicenet.train_samples), data_rng);
  Rng train_rng = rng.split("train");
  slicenet::TrainConfig tc;
  tc.epochs = static_cast<std::size_t>(scenario.slicenet.epochs);
  tc.learning_rate = scenario.slicenet.learning_rate;
  if (tc.epochs > 0) slicenet::train(net, data, tc, train_rng);
  return net;
}

// -- simulation --------------------------------------------------------------

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

enum class Role : std::uint8_t { kNormal, kImpostorUnknown, kImpostorPuf, kFlooder };

struct DeviceState {
  Device dev;
  Role role = Role::kNormal;
  std::uint32_t ap = 0;
  std::int32_t token_ap = -1;  // AP the device holds a session token for
  bool ever_authenticated = false;
  bool blocked = false;
  Micros blocked_at = 0;
  double capacity_feature = 0.0;
  double mobility_feature = 0.0;
  double fair_sla = 1.0;
  double last_throughput_bps = 0.0;
  std::optional<Indicator> last_decision;
  auth::Octets password;
  std::uint64_t puf_seed = 0;
  std::uint32_t flood_ingress_drops = 0;
};

struct Session {
  std::uint32_t device = 0;
  ServiceType requested = ServiceType::kEmbb;
  ServiceType decided = ServiceType::kEmbb;
  std::uint32_t omega = 0;
  Micros requested_at = 0;
  Micros active_from = 0;
  std::uint32_t generated = 0;
  std::uint32_t resolved = 0;
  std::uint32_t delivered = 0;
  double latency_sum_s = 0.0;
  std::uint32_t sw = kNone;
  bool flood = false;
  bool open = false;
  hopfield::ResourceBundle bundle;
};

struct Packet {
  std::uint32_t device = 0;
  std::uint32_t session = 0;
  Micros created = 0;
  std::uint8_t attempts = 0;
};

struct ApItem {
  bool request = false;
  std::uint32_t id = 0;  // session for requests, packet otherwise
};

struct AccessPoint {
  Position pos;
  sched::DualQueue<ApItem> queue;
  bool ticking = false;
  Rng rng;
  std::ostream* trace = nullptr;
  double arrival_rate = 0.0;  // smoothed request rate per second
  Micros last_request = -1;
};

struct SwitchState {
  SwitchProfile profile;
  std::uint32_t controller = 0;
  std::deque<std::uint32_t> fifo;
  bool busy = false;
  double declared_bps = 0.0;
  double interval_bits = 0.0;
  ddos::Ewma measured;
  ddos::WindowBuilder window;
  ddos::SwitchDetector detector;
  std::vector<std::uint32_t> sessions;

  double load() const { return std::max(declared_bps, measured.value()); }
};

struct Event {
  Micros t;
  EventKind kind;
  std::uint64_t seq;
  std::uint32_t a;
  std::uint32_t b;
};

struct EventAfter {
  bool operator()(const Event& x, const Event& y) const {
    if (x.t != y.t) return x.t > y.t;
    if (x.kind != y.kind) return x.kind > y.kind;
    return x.seq > y.seq;
  }
};

std::string fmt_time(Micros t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%" PRId64 ".%06" PRId64, t / 1000000, t % 1000000);
  return buf;
}

class Simulation {
 public:
  Simulation(const Scenario& sc, RunOptions& opt)
      : sc_(sc),
        opt_(opt),
        rng_(sc.network.seed),
        rng_traffic_(rng_.split("traffic")),
        rng_mobility_(rng_.split("mobility")),
        rng_auth_(rng_.split("auth")),
        rng_loss_(rng_.split("loss")),
        rng_enroll_(rng_.split("enroll")),
        end_(to_micros(sc.network.duration_s)),
        packet_bits_(8.0 * static_cast<double>(sc.packets.packet_length_bytes)),
        flow_rate_bps_(packet_bits_ / sc.packets.packet_interval_s),
        latency_(to_micros(sc.network.processing_latency_s)),
        authorities_(static_cast<std::size_t>(sc.network.devices_per_authority)),
        hopfield_(hopfield::HopfieldNet::trained()),
        model_(opt.model ? std::move(*opt.model) : prepare_model(sc)) {
    ddos_cfg_.alpha = sc.ddos.renyi_alpha;
    ddos_cfg_.k_sigma = sc.ddos.k_sigma;
    ddos_cfg_.min_packets = static_cast<std::uint64_t>(sc.ddos.min_packets);
    ddos_cfg_.min_baseline_windows = static_cast<std::size_t>(sc.ddos.baseline_windows);
    ddos_cfg_.sigma_floor_bits = sc.ddos.sigma_floor_bits;
    ddos_cfg_.dominance_factor = sc.ddos.dominance;
    coeffs_.alpha = sc.offload.alpha;
    coeffs_.beta = sc.offload.beta;
    coeffs_.gamma = sc.offload.gamma;
    coeffs_.slice_gamma[slice_index(ServiceType::kUrllc)] = sc.offload.gamma_urllc;
    solver_.edge_budget = static_cast<std::size_t>(sc.offload.edge_budget);
    pool_ = {sc.network.pool_communication_bps, sc.network.pool_computation,
             sc.network.pool_caching};
    build_topology();
    build_devices();
  }

  RunResult run() {
    if (opt_.trace) *opt_.trace << "time,kind,device,slice,switch,outcome\n";
    if (opt_.detection) ddos::write_detection_header(*opt_.detection);
    if (opt_.migrations) offload::write_migration_header(*opt_.migrations);
    for (auto& ap : aps_) {
      if (ap.trace) sched::write_trace_header(*ap.trace);
    }
    seed_events();
    while (!heap_.empty()) {
      const Event e = heap_.top();
      heap_.pop();
      // Past the horizon nothing new starts; packets already in the
      // network still resolve so the final tallies balance.
      if (e.t > end_) draining_ = true;
      if (draining_ && !drains(e)) continue;
      if (e.t < now_) throw std::logic_error("event time regression");
      now_ = e.t;
      ++global_.events;
      dispatch(e);
    }
    RunResult r;
    r.metrics = collect_metrics(counters_, sc_.network.duration_s, capacity_bps_);
    // Bandwidth of flows still open at the end.
    r.metrics.global = global_;
    r.sent_total = sent_total_;
    return r;
  }

 private:
  // -- setup ---------------------------------------------------------------

  void build_topology() {
    const auto n_ap = static_cast<std::size_t>(sc_.network.access_points);
    sched::SchedulerConfig cfg{sc_.scheduler.mu1,
                               sc_.scheduler.mu2,
                               sc_.scheduler.delta,
                               static_cast<std::uint32_t>(sc_.scheduler.steps_per_service),
                               sc_.scheduler.continue_prob,
                               static_cast<std::size_t>(sc_.scheduler.hp_capacity),
                               static_cast<std::size_t>(sc_.scheduler.lp_capacity)};
    for (std::size_t i = 0; i < n_ap; ++i) {
      // Access points sit evenly along the horizontal midline.
      const double x = sc_.network.area_width_m * (2.0 * static_cast<double>(i) + 1.0) /
                       (2.0 * static_cast<double>(n_ap));
      aps_.push_back(AccessPoint{{x, sc_.network.area_height_m / 2.0},
                                 sched::DualQueue<ApItem>(cfg),
                                 false,
                                 rng_.split("ap" + std::to_string(i)),
                                 i < opt_.scheduler_traces.size() ? opt_.scheduler_traces[i] : nullptr});
    }
    std::uint32_t id = 0;
    auto add = [&](SwitchKind kind, double cap, double loss) {
      SwitchProfile p;
      p.id = SwitchId{id};
      p.kind = kind;
      p.service_capacity_bps = cap;
      p.transmission_rate_bps = cap;
      p.loss_rate = loss;
      p.validate();
      switches_.push_back(SwitchState{p,
                                      id % static_cast<std::uint32_t>(sc_.network.local_controllers),
                                      {}, false, 0.0, 0.0,
                                      ddos::Ewma(sc_.ddos.ewma_lambda),
                                      ddos::WindowBuilder(0, 0.0, sc_.ddos.window_s),
                                      ddos::SwitchDetector(ddos_cfg_),
                                      {}});
      capacity_bps_ += cap;
      ++id;
    };
    for (std::int64_t i = 0; i < sc_.network.physical_switches; ++i) {
      add(SwitchKind::kPhysical, sc_.network.physical_capacity_bps, sc_.network.physical_loss);
    }
    for (std::int64_t i = 0; i < sc_.network.virtual_switches; ++i) {
      add(SwitchKind::kVirtual, sc_.network.virtual_capacity_bps, sc_.network.virtual_loss);
    }
  }

  ServiceType draw_service(Rng& rng) const {
    const double u = rng.uniform();
    if (u < sc_.flows.mix_embb) return ServiceType::kEmbb;
    if (u < sc_.flows.mix_embb + sc_.flows.mix_urllc) return ServiceType::kUrllc;
    return ServiceType::kMmtc;
  }

  void build_devices() {
    const auto n = static_cast<std::uint32_t>(sc_.network.devices);
    Rng roster = rng_.split("roster");
    const auto n_illegit = static_cast<std::uint32_t>(
        std::lround(sc_.network.illegitimate_fraction * static_cast<double>(n)));
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
    for (std::uint32_t i = 0; i < n_illegit && i < n; ++i) {
      std::swap(order[i], order[i + roster.below(n - i)]);
    }
    std::vector<Role> roles(n, Role::kNormal);
    for (std::uint32_t k = 0; k < n_illegit && k < n; ++k) {
      // Half impersonators (alternating unknown identity and cloned
      // credentials without the PUF), half compromised flooders.
      const std::uint32_t impostors = n_illegit / 2;
      roles[order[k]] = k < impostors ? (k % 2 == 0 ? Role::kImpostorUnknown : Role::kImpostorPuf)
                                      : Role::kFlooder;
    }
    const double w = sc_.network.area_width_m;
    const double h = sc_.network.area_height_m;
    const double vmin = sc_.mobility.speed_min_mps;
    const double vmax = sc_.mobility.speed_max_mps;
    for (std::uint32_t i = 0; i < n; ++i) {
      DeviceState d;
      d.role = roles[i];
      d.dev.id = DeviceId{i};
      d.dev.legitimate = d.role == Role::kNormal;
      d.dev.service = d.role == Role::kFlooder ? ServiceType::kMmtc : draw_service(roster);
      d.dev.imsi_hash = imsi_hash("imsi-" + std::to_string(sc_.network.seed) + "-" +
                                  std::to_string(i));
      d.dev.mobility.position = {roster.uniform(0.0, w), roster.uniform(0.0, h)};
      d.dev.mobility.waypoint = {roster.uniform(0.0, w), roster.uniform(0.0, h)};
      switch (d.dev.service) {
        case ServiceType::kEmbb:
          d.dev.mobility.speed_mps = roster.uniform(vmin, vmin + 0.7 * (vmax - vmin));
          d.capacity_feature = roster.uniform(0.4, 1.0);
          break;
        case ServiceType::kUrllc:
          d.dev.mobility.speed_mps = roster.uniform(vmin, vmax);
          d.capacity_feature = roster.uniform(0.1, 0.6);
          break;
        case ServiceType::kMmtc:
          d.dev.mobility.speed_mps = 0.0;
          d.capacity_feature = roster.uniform(0.0, 0.4);
          break;
      }
      d.mobility_feature = vmax > 0.0 ? d.dev.mobility.speed_mps / vmax : 0.0;
      d.password.resize(16);
      for (auto& b : d.password) b = static_cast<std::uint8_t>(roster.below(256));
      d.puf_seed = roster.next_u64();
      d.ap = nearest_ap(d.dev.mobility.position);
      devices_.push_back(std::move(d));
    }
    std::vector<const auth::RegistrationRecord*> overrides(n, nullptr);
    for (const auto& r : sc_.registrations) overrides[r.device.value] = &r;
    for (auto& d : devices_) {
      if (d.role == Role::kImpostorUnknown) continue;
      auth::RegistrationRecord rec;
      if (const auto* o = overrides[d.dev.id.value]) {
        rec = *o;
        d.password = o->password;
        d.puf_seed = o->puf_seed;
      } else {
        rec.device = d.dev.id;
        rec.password = d.password;
        rec.puf_seed = d.puf_seed;
        rec.challenge_count = 8;
      }
      authorities_.enroll(rec, rng_enroll_);
    }
  }

  std::uint32_t nearest_ap(const Position& p) const {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t i = 0; i < aps_.size(); ++i) {
      const double d = std::hypot(p.x - aps_[i].pos.x, p.y - aps_[i].pos.y);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  void seed_events() {
    for (auto& d : devices_) {
      if (d.role == Role::kFlooder) {
        push(to_micros(sc_.flows.flood_start_s), EventKind::kFloodStart, d.dev.id.value);
      } else {
        push(to_micros(rng_traffic_.uniform(0.0, sc_.flows.session_gap_s)),
             EventKind::kArrival, d.dev.id.value);
      }
    }
    if (!devices_.empty()) push(to_micros(sc_.mobility.tick_s), EventKind::kMobilityTick);
    if (sc_.ddos.enabled) push(to_micros(sc_.ddos.window_s), EventKind::kWindowClose);
    push(to_micros(sc_.offload.rebalance_interval_s), EventKind::kRebalance);
  }

  // -- event plumbing --------------------------------------------------------

  void push(Micros t, EventKind kind, std::uint32_t a = 0, std::uint32_t b = 0) {
    if (t < now_) throw std::logic_error("event scheduled in the past");
    heap_.push(Event{t, kind, seq_++, a, b});
  }

  void trace(EventKind kind, std::uint32_t device, std::optional<ServiceType> slice,
             std::uint32_t sw, std::string_view outcome) {
    if (!opt_.trace) return;
    std::ostream& os = *opt_.trace;
    os << fmt_time(now_) << ',' << event_kind_name(kind) << ',';
    if (device != kNone) os << device;
    os << ',';
    if (slice) os << slice_label(*slice);
    os << ',';
    if (sw != kNone) os << sw;
    os << ',' << outcome << '\n';
  }

  static bool drains(const Event& e) {
    switch (e.kind) {
      case EventKind::kScheduleSlot:
      case EventKind::kForward:
      case EventKind::kSwitchDone:
      case EventKind::kDeliver:
      case EventKind::kDrop:
        return true;
      case EventKind::kTransmit:
        return e.b != kNone;
      default:
        return false;
    }
  }

  void dispatch(const Event& e) {
    switch (e.kind) {
      case EventKind::kMobilityTick: on_mobility(); break;
      case EventKind::kWindowClose: on_window_close(); break;
      case EventKind::kRebalance: on_rebalance(); break;
      case EventKind::kFloodStart: on_flood_start(e.a); break;
      case EventKind::kArrival: on_arrival(e.a); break;
      case EventKind::kAuth: on_auth(e.a); break;
      case EventKind::kScheduleSlot: on_slot(e.a); break;
      case EventKind::kSliceDecide: on_slice_decide(e.a); break;
      case EventKind::kAllocate: on_allocate(e.a); break;
      case EventKind::kTransmit: on_transmit(e.a, e.b); break;
      case EventKind::kForward: on_forward(e.a); break;
      case EventKind::kSwitchDone: on_switch_done(e.a); break;
      case EventKind::kDeliver: on_deliver(e.a); break;
      case EventKind::kDrop: on_drop(e.a, e.b); break;
    }
  }

  // -- devices and admission -------------------------------------------------

  void on_mobility() {
    for (auto& d : devices_) {
      if (d.dev.mobility.speed_mps <= 0.0) continue;
      mobility_step(d.dev.mobility, sc_.mobility.tick_s, sc_.network.area_width_m,
                    sc_.network.area_height_m, rng_mobility_);
      const std::uint32_t ap = nearest_ap(d.dev.mobility.position);
      if (ap != d.ap) {
        d.ap = ap;
        d.token_ap = -1;  // handover: the next session re-authenticates
      }
    }
    push(now_ + to_micros(sc_.mobility.tick_s), EventKind::kMobilityTick);
  }

  void schedule_next_session(std::uint32_t device) {
    push(now_ + to_micros(rng_traffic_.exponential(sc_.flows.session_gap_s)),
         EventKind::kArrival, device);
  }

  void on_flood_start(std::uint32_t device) {
    trace(EventKind::kFloodStart, device, ServiceType::kMmtc, kNone, "start");
    on_arrival(device);
  }

  void on_arrival(std::uint32_t device) {
    DeviceState& d = devices_[device];
    if (d.blocked) return;
    trace(EventKind::kArrival, device, d.dev.service, kNone, "request");
    if (d.token_ap != static_cast<std::int32_t>(d.ap)) {
      push(now_ + latency_, EventKind::kAuth, device);
      return;
    }
    open_request(device);
  }

  void on_auth(std::uint32_t device) {
    DeviceState& d = devices_[device];
    ++global_.auth_attempts;
    auth::AuthAttempt attempt{d.dev.id, d.password, to_seconds(now_)};
    std::uint64_t seed = d.puf_seed;
    if (d.role == Role::kImpostorPuf) seed ^= 0x9e3779b97f4a7c15ULL;  // cloned without silicon
    auth::SimulatedPuf puf(seed);
    auth::PufResponder responder = [&puf](auth::OctetView c) { return puf.respond(c); };
    const auth::AuthVerdict v =
        authorities_.authenticate(attempt, to_seconds(now_), responder, rng_auth_);
    trace(EventKind::kAuth, device, d.dev.service, kNone, auth::reason_name(v.reason));
    if (!v.accepted) {
      ++global_.auth_rejections;
      schedule_next_session(device);
      return;
    }
    d.token_ap = static_cast<std::int32_t>(d.ap);
    d.ever_authenticated = true;
    open_request(device);
  }

  std::uint32_t draw_omega(ServiceType s) {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    switch (s) {
      case ServiceType::kEmbb: lo = sc_.flows.demand_embb_min; hi = sc_.flows.demand_embb_max; break;
      case ServiceType::kUrllc: lo = sc_.flows.demand_urllc_min; hi = sc_.flows.demand_urllc_max; break;
      case ServiceType::kMmtc: lo = sc_.flows.demand_mmtc_min; hi = sc_.flows.demand_mmtc_max; break;
    }
    return static_cast<std::uint32_t>(
        lo + static_cast<std::int64_t>(rng_traffic_.below(static_cast<std::uint64_t>(hi - lo + 1))));
  }

  void open_request(std::uint32_t device) {
    DeviceState& d = devices_[device];
    Session s;
    s.device = device;
    s.requested = d.dev.service;
    s.decided = d.dev.service;
    s.omega = draw_omega(d.dev.service);
    s.requested_at = now_;
    s.flood = d.role == Role::kFlooder;
    const auto id = static_cast<std::uint32_t>(sessions_.size());
    sessions_.push_back(s);

    AccessPoint& ap = aps_[d.ap];
    if (ap.last_request >= 0) {
      const double gap = std::max(to_seconds(now_ - ap.last_request), 1e-3);
      ap.arrival_rate = 0.9 * ap.arrival_rate + 0.1 / gap;
    }
    ap.last_request = now_;

    Flow probe;
    probe.slice = d.dev.service;
    probe.rate_bps = flow_rate_bps_;
    probe.packet_delay_s = qos_profile_of(d.dev.service).latency_bound_s.value_or(1.0);
    if (!ap.queue.enqueue(ApItem{true, id}, sched::classify_flow(probe))) {
      if (d.dev.legitimate) ++counters_[slice_index(s.requested)].requests;
      trace(EventKind::kArrival, device, s.requested, kNone, "ap_queue_full");
      schedule_next_session(device);
      return;
    }
    ensure_ticking(d.ap);
  }

  // -- access point scheduling -----------------------------------------------

  Micros slot_us() const { return std::max<Micros>(1, to_micros(sc_.scheduler.slot_s)); }

  void ensure_ticking(std::uint32_t ap) {
    AccessPoint& a = aps_[ap];
    if (a.ticking) return;
    a.ticking = true;
    const Micros slot = slot_us();
    push((now_ / slot + 1) * slot, EventKind::kScheduleSlot, ap);
  }

  void on_slot(std::uint32_t ap_idx) {
    AccessPoint& ap = aps_[ap_idx];
    auto out = ap.queue.service_step(ap.rng);
    if (ap.trace) sched::write_trace_row(*ap.trace, out.record);
    if (out.completed) {
      const ApItem item = out.completed->item;
      if (item.request) {
        push(now_ + latency_, EventKind::kSliceDecide, item.id);
      } else {
        push(now_ + latency_, EventKind::kForward, item.id);
      }
    }
    if (ap.queue.resident() > 0 ||
        (!draining_ && ap.queue.gamma().kind == sched::GammaKind::kVacant)) {
      push(now_ + slot_us(), EventKind::kScheduleSlot, ap_idx);
    } else {
      ap.ticking = false;
    }
  }

  // -- slice selection and allocation ----------------------------------------

  void on_slice_decide(std::uint32_t sid) {
    Session& s = sessions_[sid];
    DeviceState& d = devices_[s.device];
    const auto features = slicenet::SliceFeatureVector::make(
        s.requested, std::clamp(d.fair_sla, 0.0, 1.0), d.dev.imsi_hash, d.capacity_feature,
        std::clamp(d.mobility_feature, 0.0, 1.0));
    std::array<double, 3> history{};
    if (d.last_decision) {
      for (std::size_t c = 0; c < 3; ++c) history[c] = (*d.last_decision)[c];
    }
    const auto decision = d.last_decision
                              ? model_.select_slice(features, history)
                              : model_.select_slice(features);
    s.decided = decision.slice;
    d.last_decision = decision.indicator;
    if (s.decided != s.requested) ++global_.misrouted_decisions;
    trace(EventKind::kSliceDecide, s.device, s.decided, kNone, "decided");
    push(now_, EventKind::kAllocate, sid);
  }

  double sinr_db(const DeviceState& d) const {
    const auto& ap = aps_[d.ap].pos;
    const double dist = std::hypot(d.dev.mobility.position.x - ap.x,
                                   d.dev.mobility.position.y - ap.y);
    return 30.0 - 20.0 * std::log10(std::max(dist, 10.0) / 10.0);
  }

  double demand_factor(const Session& s) const {
    double lo = 1.0;
    double hi = 1.0;
    switch (s.requested) {
      case ServiceType::kEmbb: lo = static_cast<double>(sc_.flows.demand_embb_min); hi = static_cast<double>(sc_.flows.demand_embb_max); break;
      case ServiceType::kUrllc: lo = static_cast<double>(sc_.flows.demand_urllc_min); hi = static_cast<double>(sc_.flows.demand_urllc_max); break;
      case ServiceType::kMmtc: lo = static_cast<double>(sc_.flows.demand_mmtc_min); hi = static_cast<double>(sc_.flows.demand_mmtc_max); break;
    }
    return std::clamp(static_cast<double>(s.omega) / (0.5 * (lo + hi)), 0.5, 1.5);
  }

  static double slice_value(ServiceType s) {
    switch (s) {
      case ServiceType::kUrllc: return 1.0;
      case ServiceType::kEmbb: return 0.6;
      case ServiceType::kMmtc: return 0.3;
    }
    return 0.5;
  }

  void on_allocate(std::uint32_t sid) {
    Session& s = sessions_[sid];
    DeviceState& d = devices_[s.device];
    auto& counters = counters_[slice_index(s.decided)];
    if (d.dev.legitimate) ++counters.requests;

    double load = 0.0;
    for (const auto& sw : switches_) load += sw.load() / sw.profile.service_capacity_bps;
    if (!switches_.empty()) load /= static_cast<double>(switches_.size());
    hopfield_.set_load_threshold(sc_.network.hopfield_kappa, load);

    hopfield::AllocationRequest req;
    req.slice_indicator = indicator_of(s.decided);
    req.sinr_db = sinr_db(d);
    req.throughput_bps = d.last_throughput_bps;
    req.fair_sla = std::clamp(d.fair_sla, 0.0, 1.0);
    req.slice_capacity_bps = capacity_bps_ > 0.0 ? capacity_bps_ : 1.0;
    req.arrival_rate = aps_[d.ap].arrival_rate;
    req.slice_value = slice_value(s.decided);
    req.demand_factor = demand_factor(s);
    const auto alloc = hopfield::allocate_resources(hopfield_, req, pool_);
    if (!alloc.accepted) {
      trace(EventKind::kAllocate, s.device, s.decided, kNone, "pool_exhausted");
      schedule_next_session(s.device);
      return;
    }
    const std::uint32_t sw = place_flow(sid);
    if (sw == kNone) {
      pool_.release(alloc.granted);
      trace(EventKind::kAllocate, s.device, s.decided, kNone, "no_switch");
      schedule_next_session(s.device);
      return;
    }
    if (d.dev.legitimate) ++counters.granted;
    s.bundle = alloc.granted;
    s.sw = sw;
    s.open = true;
    s.active_from = now_;
    switches_[sw].sessions.push_back(sid);
    switches_[sw].declared_bps += flow_rate_bps_;
    trace(EventKind::kAllocate, s.device, s.decided, sw, "granted");
    push(now_, EventKind::kTransmit, sid, kNone);
  }

  Flow flow_of(std::uint32_t sid) const {
    const Session& s = sessions_[sid];
    Flow f;
    f.id = FlowId{sid};
    f.origin = DeviceId{s.device};
    f.slice = s.decided;
    f.rate_bps = flow_rate_bps_;
    f.packet_delay_s = qos_profile_of(s.decided).latency_bound_s.value_or(1.0);
    f.packet_length_bytes = static_cast<std::uint32_t>(sc_.packets.packet_length_bytes);
    f.protocol = s.decided == ServiceType::kMmtc ? Protocol::kDatagram : Protocol::kReliableStream;
    return f;
  }

  std::vector<SwitchProfile> switch_snapshot() const {
    std::vector<SwitchProfile> out;
    for (const auto& sw : switches_) {
      SwitchProfile p = sw.profile;
      p.current_load_bps = sw.load();
      out.push_back(p);
    }
    return out;
  }

  std::uint32_t place_flow(std::uint32_t sid) {
    if (switches_.empty()) return kNone;
    if (!sc_.offload.enabled) {
      return sessions_[sid].device % static_cast<std::uint32_t>(switches_.size());
    }
    offload::SolverConfig cfg = solver_;
    cfg.cardinality_bonus = 1e6;
    const auto graph = offload::OffloadGraph::build({flow_of(sid)}, switch_snapshot(), coeffs_);
    const auto a = offload::max_weight_assignment(graph, cfg);
    if (a.assignment.empty()) return kNone;
    return a.assignment.front().second.value;
  }

  // -- packets -----------------------------------------------------------------

  bool reliable(const Session& s) const {
    return sc_.protocol.retransmit && !s.flood && s.decided != ServiceType::kMmtc;
  }

  sched::QueueClass queue_class(const Session& s) const {
    return sched::classify_flow(flow_of(static_cast<std::uint32_t>(&s - sessions_.data())));
  }

  // b == kNone: generate the next packet of the session; otherwise
  // retransmit packet b.
  void on_transmit(std::uint32_t sid, std::uint32_t retry) {
    Session& s = sessions_[sid];
    if (!s.open) return;
    DeviceState& d = devices_[s.device];
    std::uint32_t pid = retry;
    if (retry == kNone) {
      pid = static_cast<std::uint32_t>(packets_.size());
      packets_.push_back(Packet{s.device, sid, now_, 0});
      ++s.generated;
      ++sent_total_;
      if (d.dev.legitimate) ++counters_[slice_index(s.decided)].sent;
      if (s.flood) ++global_.flood_packets;
      if (s.flood || s.generated < s.omega) {
        const Micros gap = s.flood ? flood_gap_us() : to_micros(sc_.packets.packet_interval_s);
        if (!(s.flood && d.blocked && d.flood_ingress_drops >= kFloodGiveUp)) {
          push(now_ + gap, EventKind::kTransmit, sid, kNone);
        }
      }
    }
    Packet& p = packets_[pid];
    ++p.attempts;
    if (d.blocked) {
      if (s.flood) ++d.flood_ingress_drops;
      push(now_, EventKind::kDrop, pid, kDropQuarantine);
      return;
    }
    trace(EventKind::kTransmit, s.device, s.decided, s.sw, p.attempts > 1 ? "retransmit" : "send");
    AccessPoint& ap = aps_[d.ap];
    if (!ap.queue.enqueue(ApItem{false, pid}, queue_class(s))) {
      push(now_, EventKind::kDrop, pid, kDropApQueue);
      return;
    }
    ensure_ticking(d.ap);
  }

  Micros flood_gap_us() const {
    const double pps = sc_.packets.bit_rate_bps / packet_bits_;
    return std::max<Micros>(1, to_micros(1.0 / pps));
  }

  void on_forward(std::uint32_t pid) {
    const Packet& p = packets_[pid];
    const Session& s = sessions_[p.session];
    if (!s.open) {
      push(now_, EventKind::kDrop, pid, kDropSessionClosed);
      return;
    }
    SwitchState& sw = switches_[s.sw];
    sw.interval_bits += packet_bits_;
    sw.window.add(p.device, to_seconds(now_),
                  static_cast<std::uint32_t>(sc_.packets.packet_length_bytes));
    if (sw.fifo.size() >= static_cast<std::size_t>(sc_.network.switch_buffer)) {
      push(now_, EventKind::kDrop, pid, kDropSwitchBuffer);
      return;
    }
    trace(EventKind::kForward, p.device, s.decided, s.sw, "enqueued");
    sw.fifo.push_back(pid);
    if (!sw.busy) start_service(s.sw);
  }

  Micros service_us(const SwitchState& sw) const {
    return std::max<Micros>(1, to_micros(packet_bits_ / sw.profile.transmission_rate_bps));
  }

  void start_service(std::uint32_t sw_idx) {
    SwitchState& sw = switches_[sw_idx];
    sw.busy = true;
    push(now_ + service_us(sw), EventKind::kSwitchDone, sw_idx);
  }

  void on_switch_done(std::uint32_t sw_idx) {
    SwitchState& sw = switches_[sw_idx];
    const std::uint32_t pid = sw.fifo.front();
    sw.fifo.pop_front();
    if (rng_loss_.bernoulli(sw.profile.loss_rate)) {
      push(now_, EventKind::kDrop, pid, kDropLoss);
    } else {
      push(now_ + latency_, EventKind::kDeliver, pid);
    }
    if (!sw.fifo.empty()) {
      start_service(sw_idx);
    } else {
      sw.busy = false;
    }
  }

  void on_deliver(std::uint32_t pid) {
    const Packet& p = packets_[pid];
    Session& s = sessions_[p.session];
    DeviceState& d = devices_[p.device];
    if (d.blocked) {
      push(now_, EventKind::kDrop, pid, kDropQuarantine);
      return;
    }
    if (!d.ever_authenticated) ++global_.unauthenticated_deliveries;
    trace(EventKind::kDeliver, p.device, s.decided, s.sw, "delivered");
    if (!d.dev.legitimate) {
      ++global_.illegitimate_deliveries;
    } else {
      auto& c = counters_[slice_index(s.decided)];
      ++c.delivered;
      c.delivered_bits += packet_bits_;
      c.latency_sum_s += to_seconds(now_ - p.created);
    }
    ++s.delivered;
    s.latency_sum_s += to_seconds(now_ - p.created);
    resolve(p.session);
  }

  static constexpr std::uint32_t kDropLoss = 0;
  static constexpr std::uint32_t kDropSwitchBuffer = 1;
  static constexpr std::uint32_t kDropApQueue = 2;
  static constexpr std::uint32_t kDropQuarantine = 3;
  static constexpr std::uint32_t kDropSessionClosed = 4;
  static constexpr std::uint32_t kFloodGiveUp = 100;

  static std::string_view drop_reason(std::uint32_t r) {
    switch (r) {
      case kDropLoss: return "link_loss";
      case kDropSwitchBuffer: return "switch_buffer";
      case kDropApQueue: return "ap_queue_full";
      case kDropQuarantine: return "quarantined";
      case kDropSessionClosed: return "session_closed";
    }
    return "?";
  }

  void on_drop(std::uint32_t pid, std::uint32_t reason) {
    Packet& p = packets_[pid];
    Session& s = sessions_[p.session];
    DeviceState& d = devices_[p.device];
    const bool retry = reliable(s) && p.attempts < 2 && !d.blocked && s.open &&
                       reason != kDropQuarantine && reason != kDropSessionClosed;
    trace(EventKind::kDrop, p.device, s.decided, s.sw,
          retry ? std::string(drop_reason(reason)) + "_retry" : drop_reason(reason));
    if (retry) {
      push(now_ + to_micros(sc_.protocol.retransmit_timeout_s), EventKind::kTransmit,
           p.session, pid);
      return;
    }
    if (d.dev.legitimate) ++counters_[slice_index(s.decided)].dropped;
    resolve(p.session);
  }

  void resolve(std::uint32_t sid) {
    Session& s = sessions_[sid];
    ++s.resolved;
    if (s.flood || s.resolved < s.omega) return;
    close_session(sid);
  }

  void close_session(std::uint32_t sid) {
    Session& s = sessions_[sid];
    if (!s.open) return;
    s.open = false;
    DeviceState& d = devices_[s.device];
    const double active_s = to_seconds(now_ - s.active_from);
    if (d.dev.legitimate) {
      auto& c = counters_[slice_index(s.decided)];
      c.response_sum_s += to_seconds(now_ - s.requested_at);
      ++c.responses;
      c.bandwidth_bits += flow_rate_bps_ * active_s;
    }
    pool_.release(s.bundle);
    SwitchState& sw = switches_[s.sw];
    sw.declared_bps = std::max(0.0, sw.declared_bps - flow_rate_bps_);
    std::erase(sw.sessions, sid);

    // Refresh the device's fairness weight from what this session achieved.
    QosMeasurement m;
    m.availability = 1.0;
    m.latency_s = s.delivered ? s.latency_sum_s / s.delivered : 0.0;
    m.throughput_bps =
        active_s > 0.0 ? packet_bits_ * s.delivered / active_s : 0.0;
    m.reliability = s.omega ? static_cast<double>(s.delivered) / s.omega : 0.0;
    d.fair_sla = fairness_weight(compute_sla_ratios(m, s.requested).ratios);
    d.last_throughput_bps = m.throughput_bps;
    schedule_next_session(s.device);
  }

  // -- control plane -----------------------------------------------------------

  void on_window_close() {
    for (std::uint32_t i = 0; i < switches_.size(); ++i) {
      SwitchState& sw = switches_[i];
      const ddos::TrafficWindow w = sw.window.take();
      const auto outcome = sw.detector.close_window(w);
      if (outcome.report.verdict == ddos::Verdict::kAttack) ++global_.attack_windows;
      for (auto src : outcome.blocked) block(src);
      if (opt_.detection) {
        ddos::write_detection_row(*opt_.detection, w, sw.profile.id, outcome.report,
                                  outcome.blocked);
      }
    }
    push(now_ + to_micros(sc_.ddos.window_s), EventKind::kWindowClose);
  }

  void block(std::uint32_t device) {
    DeviceState& d = devices_[device];
    if (d.blocked) return;
    d.blocked = true;
    d.blocked_at = now_;
    ++global_.quarantined_devices;
    if (!d.dev.legitimate) ++global_.quarantined_illegitimate;
    trace(EventKind::kWindowClose, device, std::nullopt, kNone, "quarantined");
  }

  void on_rebalance() {
    const double interval = sc_.offload.rebalance_interval_s;
    for (auto& sw : switches_) {
      sw.measured.update(sw.interval_bits / interval);
      sw.interval_bits = 0.0;
    }
    if (sc_.offload.enabled) {
      for (std::uint32_t i = 0; i < switches_.size(); ++i) {
        if (switches_[i].load() > switches_[i].profile.service_capacity_bps) rebalance(i);
      }
    }
    push(now_ + to_micros(interval), EventKind::kRebalance);
  }

  void rebalance(std::uint32_t trigger) {
    std::vector<offload::ActiveFlow> active;
    for (auto sid : switches_[trigger].sessions) {
      active.push_back({flow_of(sid), SwitchId{trigger}});
    }
    const auto plan = offload::rebalance(switch_snapshot(), active, SwitchId{trigger},
                                         coeffs_, solver_);
    for (const auto& m : plan.migrations) {
      const std::uint32_t sid = m.flow.value;
      Session& s = sessions_[sid];
      SwitchState& from = switches_[m.from.value];
      SwitchState& to = switches_[m.to.value];
      std::erase(from.sessions, sid);
      from.declared_bps = std::max(0.0, from.declared_bps - flow_rate_bps_);
      to.sessions.push_back(sid);
      to.declared_bps += flow_rate_bps_;
      s.sw = m.to.value;
      ++global_.migrations;
      trace(EventKind::kRebalance, s.device, s.decided, m.to.value, "migrated");
      if (opt_.migrations) {
        offload::write_migration_row(*opt_.migrations,
                                     to_seconds(now_) + offload::kMigrationDelayS, m,
                                     "overload");
      }
    }
  }

  // -- state -------------------------------------------------------------------

  const Scenario& sc_;
  RunOptions& opt_;
  Rng rng_;
  Rng rng_traffic_;
  Rng rng_mobility_;
  Rng rng_auth_;
  Rng rng_loss_;
  Rng rng_enroll_;
  Micros now_ = 0;
  Micros end_;
  bool draining_ = false;
  std::uint64_t seq_ = 0;
  double packet_bits_;
  double flow_rate_bps_;
  Micros latency_;
  double capacity_bps_ = 0.0;

  auth::VirtualAuthorityPool authorities_;
  hopfield::HopfieldNet hopfield_;
  slicenet::SliceNet model_;
  hopfield::ResourcePool pool_;
  ddos::DetectorConfig ddos_cfg_;
  offload::WeightCoefficients coeffs_;
  offload::SolverConfig solver_;

  std::vector<AccessPoint> aps_;
  std::vector<SwitchState> switches_;
  std::vector<DeviceState> devices_;
  std::vector<Session> sessions_;
  std::vector<Packet> packets_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> heap_;

  std::array<SliceCounters, 3> counters_{};
  GlobalCounters global_;
  std::uint64_t sent_total_ = 0;
};

}  // namespace

RunResult run_scenario(const Scenario& scenario, RunOptions options) {
  scenario.validate();
  Simulation sim(scenario, options);
  return sim.run();
}

}  // namespace ts3ra::engine
