#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ts3ra/domain.hpp"

namespace ts3ra::hopfield {

inline constexpr std::size_t kRepetition = 4;
inline constexpr std::size_t kEncodedSize = 3 * kRepetition;

/// Symmetric N x N weights with a zero diagonal, stored row-major.
struct WeightMatrix {
  std::size_t n = 0;
  std::vector<double> we;

  static WeightMatrix zeros(std::size_t n) { return {n, std::vector<double>(n * n, 0.0)}; }
  double operator()(std::size_t i, std::size_t j) const { return we[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return we[i * n + j]; }
  void validate() const;
  friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;
};

struct ThresholdVector {
  std::vector<double> thetas;

  static ThresholdVector zeros(std::size_t n) { return {std::vector<double>(n, 0.0)}; }
  static ThresholdVector uniform(std::size_t n, double theta) {
    return {std::vector<double>(n, theta)};
  }
};

/// Bipolar state, every entry -1 or +1.
using StatePattern = std::vector<std::int8_t>;

void validate_pattern(const StatePattern& st);

double weighted_sum(const WeightMatrix& we, const StatePattern& st,
                    std::size_t i);
/// Sum over n outside {i, j} of we[i][n] * xi[n]. Requires i != j.
double local_field(const WeightMatrix& we, const StatePattern& xi,
                   std::size_t i, std::size_t j);
/// One Storkey increment; local fields use `prev`.
WeightMatrix storkey_update(const WeightMatrix& prev, const StatePattern& xi);

/// Synchronous sign update; sign(0) = +1.
StatePattern update_state(const WeightMatrix& we, const ThresholdVector& th,
                          const StatePattern& st);

enum class RecallStatus : std::uint8_t { kFixedPoint, kTwoCycle, kMaxIters };

struct RecallResult {
  StatePattern state;
  std::size_t iterations = 0;
  RecallStatus status = RecallStatus::kMaxIters;
};

RecallResult recall(const WeightMatrix& we, const ThresholdVector& th,
                    const StatePattern& probe, std::size_t max_iters = 10);

StatePattern encode_pattern(const Indicator& indicator);
/// Per-block majority; a 2/2 tie in a block decodes to 1.
Indicator decode_pattern(const StatePattern& st);
std::size_t hamming(const StatePattern& a, const StatePattern& b);

struct Classification {
  ServiceType slice = ServiceType::kEmbb;
  RecallResult recall;
  bool snapped = false;  // recall ended away from every stored pattern
};

class HopfieldNet {
 public:
  /// Trains on the three encoded service indicators, eMBB first.
  static HopfieldNet trained();
  explicit HopfieldNet(WeightMatrix we, std::vector<StatePattern> patterns);

  const WeightMatrix& weights() const { return we_; }
  const ThresholdVector& thresholds() const { return th_; }
  const std::vector<StatePattern>& patterns() const { return patterns_; }

  /// Uniform thresholds theta = kappa * load.
  void set_load_threshold(double kappa, double load);

  Classification classify(const Indicator& indicator,
                          std::size_t max_iters = 10) const;

  void save(std::ostream& os) const;
  static HopfieldNet load(std::istream& is);

 private:
  WeightMatrix we_;
  ThresholdVector th_;
  std::vector<StatePattern> patterns_;
};

struct ResourceBundle {
  double communication_bps = 0.0;
  double computation = 0.0;
  double caching = 0.0;
};

struct BundleTable {
  std::array<ResourceBundle, 3> base{{{100e3, 1.0, 1.0},
                                      {100e3, 1.0, 1.0},
                                      {25e3, 1.0, 1.0}}};
};

struct ResourcePool {
  double communication_bps = 0.0;
  double computation = 0.0;
  double caching = 0.0;

  bool exhausted() const {
    return communication_bps <= 0.0 || computation <= 0.0 || caching <= 0.0;
  }
  void release(const ResourceBundle& b) {
    communication_bps += b.communication_bps;
    computation += b.computation;
    caching += b.caching;
  }
};

struct AllocationRequest {
  Indicator slice_indicator{};
  double sinr_db = 0.0;
  double throughput_bps = 0.0;
  double fair_sla = 1.0;
  double slice_capacity_bps = 1.0;
  double arrival_rate = 0.0;
  double slice_value = 0.5;
  double demand_factor = 1.0;

  void validate() const;
};

/// Maps the raw request inputs onto multiplicative factors in [0.5, 1.5].
struct ScalingConfig {
  double sinr_low_db = -5.0;
  double sinr_high_db = 30.0;
  double arrival_reference = 10.0;
};

struct ResourceAllocation {
  ServiceType slice = ServiceType::kEmbb;
  ResourceBundle granted;
  bool accepted = false;
  Classification classification;
};

double bundle_scale(const AllocationRequest& r, const ScalingConfig& cfg);

/// Recalls the slice, scales its bundle and draws it from `pool`.
ResourceAllocation allocate_resources(const HopfieldNet& net,
                                      const AllocationRequest& request,
                                      ResourcePool& pool,
                                      const BundleTable& table = {},
                                      const ScalingConfig& scaling = {});

}  // namespace ts3ra::hopfield
