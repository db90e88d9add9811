#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "ts3ra/domain.hpp"
#include "ts3ra/rng.hpp"

namespace ts3ra::ddos {

/// H = log2(sum p^alpha) / (1 - alpha), in bits. Zero bins contribute
/// nothing. Requires sum p = 1 within 1e-9, alpha > 0 and alpha != 1.
double renyi_entropy(std::span<const double> p, double alpha);
double shannon_entropy(std::span<const double> p);

std::vector<double> normalize_counts(std::span<const std::uint64_t> counts);

struct TrafficWindow {
  std::uint64_t window_id = 0;
  double start_s = 0.0;
  double duration_s = 1.0;
  std::map<std::uint32_t, std::uint64_t> source_counts;
  std::vector<double> interarrivals_s;
  std::vector<std::uint32_t> sizes_bytes;

  std::uint64_t packets() const;
  std::size_t source_count() const { return source_counts.size(); }
  void validate() const;
};

/// Collects packets for one tumbling window.
class WindowBuilder {
 public:
  WindowBuilder(std::uint64_t id, double start_s, double duration_s);
  void add(std::uint32_t source, double time_s, std::uint32_t size_bytes);
  TrafficWindow take();
  std::uint64_t packets() const { return packets_; }

 private:
  TrafficWindow w_;
  double last_time_ = -1.0;
  std::uint64_t packets_ = 0;
};

enum class Verdict : std::uint8_t { kBenign, kAttack, kInconclusive };
std::string_view verdict_name(Verdict v);

struct EntropyReport {
  double h_source = 0.0;
  double h_interarrival = 0.0;
  double h_size = 0.0;
  double alpha = 2.0;
  Verdict verdict = Verdict::kInconclusive;
};

struct DetectorConfig {
  double alpha = 2.0;
  double k_sigma = 3.0;
  std::uint64_t min_packets = 30;
  std::size_t min_baseline_windows = 10;
  /// Lower bound on the baseline deviation so a perfectly steady baseline
  /// does not flag ordinary sampling noise.
  double sigma_floor_bits = 0.05;
  double dominance_factor = 3.0;
};

/// Entropies of a window without a verdict (kInconclusive if too small).
EntropyReport measure(const TrafficWindow& w, const DetectorConfig& cfg);

class Baseline {
 public:
  void add(const EntropyReport& benign);
  std::size_t size() const { return source_.size(); }
  double source_mean() const;
  double source_stddev() const;
  double size_mean() const;
  double size_stddev() const;

 private:
  std::vector<double> source_;
  std::vector<double> size_;
};

/// Attack when the source or size entropy drops below mean - k * sigma.
/// Throws InvariantError if the baseline holds fewer than the configured
/// minimum of windows.
EntropyReport classify_window(const TrafficWindow& w, const Baseline& baseline,
                              const DetectorConfig& cfg);

/// Sources whose packet share exceeds dominance_factor times the fair share.
std::vector<std::uint32_t> quarantine(const EntropyReport& report,
                                      const TrafficWindow& w,
                                      double dominance_factor = 3.0);

struct BandwidthPrediction {
  SwitchId switch_id;
  double predicted_usage_bps = 0.0;
  double lambda = 0.3;
};

BandwidthPrediction predict_bandwidth(SwitchId sw,
                                      std::span<const double> history,
                                      double lambda = 0.3);

class Ewma {
 public:
  explicit Ewma(double lambda = 0.3);
  double update(double sample);
  double value() const { return value_; }
  bool primed() const { return primed_; }

 private:
  double lambda_;
  double value_ = 0.0;
  bool primed_ = false;
};

/// Online per-switch detector: the first classifiable windows build the
/// baseline, later ones are classified against it.
class SwitchDetector {
 public:
  explicit SwitchDetector(DetectorConfig cfg = {}) : cfg_(cfg) {}
  struct Outcome {
    EntropyReport report;
    std::vector<std::uint32_t> blocked;
    bool learning = false;
  };
  Outcome close_window(const TrafficWindow& w);
  const Baseline& baseline() const { return baseline_; }

 private:
  DetectorConfig cfg_;
  Baseline baseline_;
};

void write_detection_header(std::ostream& os);
void write_detection_row(std::ostream& os, const TrafficWindow& w,
                         SwitchId sw, const EntropyReport& r,
                         std::span<const std::uint32_t> blocked);

struct FloodSuiteConfig {
  std::size_t sources = 50;
  double benign_rate_pps = 10.0;
  double flood_multiplier = 10.0;
  double min_flood_fraction = 0.05;
  double max_flood_fraction = 0.10;
  std::size_t baseline_windows = 20;
  std::size_t test_windows = 200;
  double attack_probability = 0.5;
  std::uint32_t packet_size = 512;
};

struct LabeledWindow {
  TrafficWindow window;
  bool attack = false;
};

struct FloodSuite {
  std::vector<TrafficWindow> baseline;
  std::vector<LabeledWindow> tests;
};

/// Poisson packet streams from `sources` benign senders; in attack windows
/// a random 5 to 10 percent of them send at `flood_multiplier` times the rate.
FloodSuite synthetic_flood_suite(const FloodSuiteConfig& cfg, Rng& rng);

struct DetectionScore {
  double recall = 0.0;
  double false_positive_rate = 0.0;
  std::size_t attacks = 0;
  std::size_t benign = 0;
};

DetectionScore evaluate(const FloodSuite& suite, const DetectorConfig& cfg);

}  // namespace ts3ra::ddos
