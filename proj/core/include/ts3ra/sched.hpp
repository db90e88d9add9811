#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <string>

#include "ts3ra/domain.hpp"
#include "ts3ra/rng.hpp"

namespace ts3ra::sched {

enum class QueueClass : std::uint8_t { kHigh = 0, kLow = 1 };

inline constexpr double kInelasticDelayBound = 10e-3;

/// Inelastic flows go to the high-priority queue: URLLC always, any other
/// flow whose delay bound is below 10 ms.
QueueClass classify_flow(const Flow& flow);

struct SchedulerConfig {
  double mu1 = 0.7;  // HP service share
  double mu2 = 0.3;  // LP service share
  double delta = 0.75;
  std::uint32_t steps_per_service = 1;
  double continue_prob = 0.9;
  std::size_t hp_capacity = 1000;
  std::size_t lp_capacity = 1000;
};

class ConfigError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

/// Throws ConfigError naming the first violated invariant.
void validate_config(const SchedulerConfig& config);

enum class Decision : std::uint8_t { kServeHp, kServeLp, kIdle };
std::string_view decision_name(Decision d);

enum class GammaKind : std::uint8_t { kIdle, kBusy, kVacant };

/// Queue state variable: 0 idle, n busy with n requests, n + 1 vacant.
struct Gamma {
  GammaKind kind = GammaKind::kIdle;
  std::uint32_t n = 0;

  std::uint32_t value() const {
    switch (kind) {
      case GammaKind::kIdle: return 0;
      case GammaKind::kBusy: return n;
      case GammaKind::kVacant: return n + 1;
    }
    return 0;
  }
};

struct SlotRecord {
  std::uint64_t slot = 0;
  Decision decision = Decision::kIdle;
  std::size_t hp_len = 0;
  std::size_t lp_len = 0;
  Gamma gamma;
};

void write_trace_header(std::ostream& os);
void write_trace_row(std::ostream& os, const SlotRecord& r);

struct ClassCounters {
  std::uint64_t offered = 0;
  std::uint64_t served = 0;
  std::uint64_t dropped = 0;
};

/// Two-class queue at the access point. Each slot one class is chosen and
/// the head of that class receives one service step; an item leaves after
/// `steps_per_service` steps. Progress of a partly served head is kept when
/// the other class is chosen.
template <typename T>
class DualQueue {
 public:
  struct Completion {
    T item;
    QueueClass cls;
  };
  struct SlotOutcome {
    SlotRecord record;
    std::optional<Completion> completed;
  };

  explicit DualQueue(SchedulerConfig config) : config_(config) {
    validate_config(config_);
  }

  const SchedulerConfig& config() const { return config_; }

  /// Appends to the class FIFO; returns false (and counts a drop) when full.
  bool enqueue(T item, QueueClass cls) {
    auto& c = counters_[idx(cls)];
    ++c.offered;
    auto& q = queue(cls);
    if (q.size() >= capacity(cls)) {
      ++c.dropped;
      return false;
    }
    q.push_back(Entry{std::move(item), 0});
    if (gamma_.kind != GammaKind::kVacant) {
      gamma_ = {GammaKind::kBusy, static_cast<std::uint32_t>(resident())};
    } else {
      gamma_.n = static_cast<std::uint32_t>(resident());
    }
    if (hp_fraction() >= config_.delta) exclusive_hp_ = true;
    return true;
  }

  bool hp_exclusive() const {
    return !hp_.empty() && (exclusive_hp_ || hp_fraction() >= config_.delta);
  }

  /// Pure apart from the Bernoulli draw taken when both classes compete.
  Decision next_service_decision(Rng& rng) const {
    if (gamma_.kind == GammaKind::kVacant) return Decision::kIdle;
    if (hp_exclusive()) return Decision::kServeHp;
    const bool has_hp = !hp_.empty();
    const bool has_lp = !lp_.empty();
    if (has_hp && has_lp) {
      return rng.bernoulli(config_.mu1) ? Decision::kServeHp
                                        : Decision::kServeLp;
    }
    if (has_hp) return Decision::kServeHp;
    if (has_lp) return Decision::kServeLp;
    return Decision::kIdle;
  }

  /// Runs one slot.
  SlotOutcome service_step(Rng& rng) {
    SlotOutcome out;
    ++slot_;
    if (gamma_.kind == GammaKind::kVacant) {
      refresh_gamma();
      out.record = record(Decision::kIdle);
      return out;
    }
    const Decision d = next_service_decision(rng);
    if (d == Decision::kIdle) {
      refresh_gamma();
      out.record = record(d);
      return out;
    }
    const QueueClass cls =
        d == Decision::kServeHp ? QueueClass::kHigh : QueueClass::kLow;
    auto& q = queue(cls);
    Entry& head = q.front();
    if (++head.steps_done >= config_.steps_per_service) {
      out.completed = Completion{std::move(head.item), cls};
      q.pop_front();
      ++counters_[idx(cls)].served;
    }
    if (hp_.empty()) exclusive_hp_ = false;
    if (out.completed && resident() == 0) {
      // Window drained: with probability 1 - P the server goes vacant.
      if (!rng.bernoulli(config_.continue_prob)) {
        gamma_ = {GammaKind::kVacant, 0};
      } else {
        gamma_ = {GammaKind::kIdle, 0};
      }
    } else {
      refresh_gamma();
    }
    out.record = record(d);
    return out;
  }

  std::size_t hp_len() const { return hp_.size(); }
  std::size_t lp_len() const { return lp_.size(); }
  std::size_t resident() const { return hp_.size() + lp_.size(); }
  std::size_t resident(QueueClass cls) const { return queue(cls).size(); }
  const ClassCounters& counters(QueueClass cls) const {
    return counters_[idx(cls)];
  }
  Gamma gamma() const { return gamma_; }
  std::uint64_t slot() const { return slot_; }
  bool idle() const { return gamma_.kind == GammaKind::kIdle; }

  /// Items in FIFO order, head first; for inspection only.
  template <typename Fn>
  void for_each(QueueClass cls, Fn&& fn) const {
    for (const auto& e : queue(cls)) fn(e.item);
  }

 private:
  struct Entry {
    T item;
    std::uint32_t steps_done;
  };

  static constexpr std::size_t idx(QueueClass c) {
    return static_cast<std::size_t>(c);
  }
  std::deque<Entry>& queue(QueueClass c) {
    return c == QueueClass::kHigh ? hp_ : lp_;
  }
  const std::deque<Entry>& queue(QueueClass c) const {
    return c == QueueClass::kHigh ? hp_ : lp_;
  }
  std::size_t capacity(QueueClass c) const {
    return c == QueueClass::kHigh ? config_.hp_capacity : config_.lp_capacity;
  }
  double hp_fraction() const {
    return static_cast<double>(hp_.size()) /
           static_cast<double>(config_.hp_capacity);
  }
  void refresh_gamma() {
    gamma_ = resident() == 0
                 ? Gamma{GammaKind::kIdle, 0}
                 : Gamma{GammaKind::kBusy,
                         static_cast<std::uint32_t>(resident())};
  }
  SlotRecord record(Decision d) const {
    return {slot_, d, hp_.size(), lp_.size(), gamma_};
  }

  SchedulerConfig config_;
  std::deque<Entry> hp_;
  std::deque<Entry> lp_;
  std::array<ClassCounters, 2> counters_{};
  Gamma gamma_;
  std::uint64_t slot_ = 0;
  bool exclusive_hp_ = false;
};

}  // namespace ts3ra::sched
