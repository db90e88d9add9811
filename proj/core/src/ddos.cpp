#include "ts3ra/ddos.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ts3ra::ddos {

namespace {

void check_distribution(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw InvariantError("distribution has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvariantError("distribution does not sum to 1");
  }
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Inter-arrival gaps binned by octave of microseconds.
std::vector<std::uint64_t> gap_histogram(const std::vector<double>& gaps) {
  std::vector<std::uint64_t> bins(32, 0);
  for (double g : gaps) {
    const double us = std::max(g * 1e6, 1.0);
    const auto b = static_cast<std::size_t>(std::clamp(std::floor(std::log2(us)), 0.0, 31.0));
    ++bins[b];
  }
  return bins;
}

double entropy_of_counts(std::span<const std::uint64_t> counts, double alpha) {
  const auto p = normalize_counts(counts);
  if (p.empty()) return 0.0;
  return renyi_entropy(p, alpha);
}

}  // namespace

double renyi_entropy(std::span<const double> p, double alpha) {
  if (!(alpha > 0.0)) throw InvariantError("renyi_entropy: alpha must be > 0");
  if (alpha == 1.0) {
    throw InvariantError(
        "renyi_entropy: alpha = 1 is the Shannon limit, use shannon_entropy");
  }
  check_distribution(p);
  double s = 0.0;
  for (double v : p) {
    if (v > 0.0) s += std::pow(v, alpha);
  }
  const double h = std::log2(s) / (1.0 - alpha);
  return h < 0.0 ? 0.0 : h;
}

double shannon_entropy(std::span<const double> p) {
  check_distribution(p);
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

std::vector<double> normalize_counts(std::span<const std::uint64_t> counts) {
  const double total = static_cast<double>(
      std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  std::vector<double> p;
  if (total == 0.0) return p;
  p.reserve(counts.size());
  for (auto c : counts) p.push_back(static_cast<double>(c) / total);
  return p;
}

std::uint64_t TrafficWindow::packets() const {
  std::uint64_t n = 0;
  for (const auto& [_, c] : source_counts) n += c;
  return n;
}

void TrafficWindow::validate() const {
  if (!(duration_s > 0.0)) throw InvariantError("TrafficWindow: duration <= 0");
  for (double g : interarrivals_s) {
    if (g < 0.0) throw InvariantError("TrafficWindow: negative inter-arrival");
  }
}

WindowBuilder::WindowBuilder(std::uint64_t id, double start_s, double duration_s) {
  w_.window_id = id;
  w_.start_s = start_s;
  w_.duration_s = duration_s;
}

void WindowBuilder::add(std::uint32_t source, double time_s,
                        std::uint32_t size_bytes) {
  ++w_.source_counts[source];
  if (last_time_ >= 0.0) w_.interarrivals_s.push_back(time_s - last_time_);
  last_time_ = time_s;
  w_.sizes_bytes.push_back(size_bytes);
  ++packets_;
}

TrafficWindow WindowBuilder::take() {
  TrafficWindow out = std::move(w_);
  w_ = TrafficWindow{};
  w_.window_id = out.window_id + 1;
  w_.start_s = out.start_s + out.duration_s;
  w_.duration_s = out.duration_s;
  last_time_ = -1.0;
  packets_ = 0;
  return out;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kBenign: return "benign";
    case Verdict::kAttack: return "attack";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "?";
}

EntropyReport measure(const TrafficWindow& w, const DetectorConfig& cfg) {
  w.validate();
  EntropyReport r;
  r.alpha = cfg.alpha;
  r.verdict = Verdict::kInconclusive;
  if (w.packets() == 0) return r;

  std::vector<std::uint64_t> sources;
  sources.reserve(w.source_counts.size());
  for (const auto& [_, c] : w.source_counts) sources.push_back(c);
  r.h_source = entropy_of_counts(sources, cfg.alpha);
  r.h_interarrival = entropy_of_counts(gap_histogram(w.interarrivals_s), cfg.alpha);

  std::map<std::uint32_t, std::uint64_t> by_size;
  for (auto s : w.sizes_bytes) ++by_size[s];
  std::vector<std::uint64_t> sizes;
  for (const auto& [_, c] : by_size) sizes.push_back(c);
  r.h_size = entropy_of_counts(sizes, cfg.alpha);
  return r;
}

void Baseline::add(const EntropyReport& benign) {
  source_.push_back(benign.h_source);
  size_.push_back(benign.h_size);
}
double Baseline::source_mean() const { return mean_of(source_); }
double Baseline::source_stddev() const { return stddev_of(source_); }
double Baseline::size_mean() const { return mean_of(size_); }
double Baseline::size_stddev() const { return stddev_of(size_); }

EntropyReport classify_window(const TrafficWindow& w, const Baseline& baseline,
                              const DetectorConfig& cfg) {
  if (baseline.size() < cfg.min_baseline_windows) {
    throw InvariantError("classify_window: baseline needs at least " +
                         std::to_string(cfg.min_baseline_windows) + " windows");
  }
  EntropyReport r = measure(w, cfg);
  if (w.packets() < cfg.min_packets) {
    r.verdict = Verdict::kInconclusive;
    return r;
  }
  const double src_cut =
      baseline.source_mean() -
      cfg.k_sigma * std::max(baseline.source_stddev(), cfg.sigma_floor_bits);
  const double size_cut =
      baseline.size_mean() -
      cfg.k_sigma * std::max(baseline.size_stddev(), cfg.sigma_floor_bits);
  r.verdict = (r.h_source < src_cut || r.h_size < size_cut) ? Verdict::kAttack
                                                            : Verdict::kBenign;
  return r;
}

std::vector<std::uint32_t> quarantine(const EntropyReport& report,
                                      const TrafficWindow& w,
                                      double dominance_factor) {
  std::vector<std::uint32_t> out;
  if (report.verdict != Verdict::kAttack || w.source_counts.empty()) return out;
  const double total = static_cast<double>(w.packets());
  const double fair = 1.0 / static_cast<double>(w.source_count());
  for (const auto& [src, c] : w.source_counts) {
    if (static_cast<double>(c) / total > dominance_factor * fair) out.push_back(src);
  }
  return out;
}

Ewma::Ewma(double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw InvariantError("EWMA smoothing must lie in (0, 1]");
  }
}

double Ewma::update(double sample) {
  value_ = primed_ ? lambda_ * sample + (1.0 - lambda_) * value_ : sample;
  primed_ = true;
  return value_;
}

BandwidthPrediction predict_bandwidth(SwitchId sw,
                                      std::span<const double> history,
                                      double lambda) {
  if (history.empty()) throw InvariantError("predict_bandwidth: empty history");
  Ewma e(lambda);
  for (double x : history) e.update(x);
  return {sw, std::max(0.0, e.value()), lambda};
}

SwitchDetector::Outcome SwitchDetector::close_window(const TrafficWindow& w) {
  Outcome out;
  if (baseline_.size() < cfg_.min_baseline_windows) {
    out.report = measure(w, cfg_);
    out.learning = true;
    if (w.packets() >= cfg_.min_packets) {
      out.report.verdict = Verdict::kBenign;
      baseline_.add(out.report);
    }
    return out;
  }
  out.report = classify_window(w, baseline_, cfg_);
  out.blocked = quarantine(out.report, w, cfg_.dominance_factor);
  return out;
}

void write_detection_header(std::ostream& os) {
  os << "window_start,switch_id,h_source,h_interarrival,h_size,verdict,"
        "blocked_sources\n";
}

void write_detection_row(std::ostream& os, const TrafficWindow& w,
                         SwitchId sw, const EntropyReport& r,
                         std::span<const std::uint32_t> blocked) {
  // Adding zero folds a negative zero into the plain spelling.
  os << w.start_s << ',' << sw.value << ',' << r.h_source + 0.0 << ','
     << r.h_interarrival + 0.0 << ',' << r.h_size + 0.0 << ','
     << verdict_name(r.verdict)
     << ',';
  for (std::size_t i = 0; i < blocked.size(); ++i) {
    if (i) os << ';';
    os << blocked[i];
  }
  os << '\n';
}

namespace {

TrafficWindow generate_window(const FloodSuiteConfig& cfg, std::uint64_t id,
                              bool attack, Rng& rng) {
  std::vector<double> rates(cfg.sources, cfg.benign_rate_pps);
  if (attack) {
    const double frac = rng.uniform(cfg.min_flood_fraction, cfg.max_flood_fraction);
    const auto flooders = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(frac * static_cast<double>(cfg.sources))));
    std::vector<std::size_t> idx(cfg.sources);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < flooders; ++i) {
      std::swap(idx[i], idx[i + rng.below(cfg.sources - i)]);
      rates[idx[i]] *= cfg.flood_multiplier;
    }
  }
  struct Pkt {
    double t;
    std::uint32_t src;
  };
  std::vector<Pkt> pkts;
  for (std::size_t s = 0; s < cfg.sources; ++s) {
    for (double t = rng.exponential(1.0 / rates[s]); t < 1.0;
         t += rng.exponential(1.0 / rates[s])) {
      pkts.push_back({t, static_cast<std::uint32_t>(s)});
    }
  }
  std::sort(pkts.begin(), pkts.end(), [](const Pkt& a, const Pkt& b) {
    return a.t < b.t || (a.t == b.t && a.src < b.src);
  });
  WindowBuilder b(id, static_cast<double>(id), 1.0);
  for (const auto& p : pkts) b.add(p.src, static_cast<double>(id) + p.t, cfg.packet_size);
  return b.take();
}

}  // namespace

FloodSuite synthetic_flood_suite(const FloodSuiteConfig& cfg, Rng& rng) {
  if (cfg.sources == 0) throw InvariantError("flood suite needs sources");
  FloodSuite suite;
  std::uint64_t id = 0;
  for (std::size_t i = 0; i < cfg.baseline_windows; ++i) {
    suite.baseline.push_back(generate_window(cfg, id++, false, rng));
  }
  for (std::size_t i = 0; i < cfg.test_windows; ++i) {
    const bool attack = rng.bernoulli(cfg.attack_probability);
    suite.tests.push_back({generate_window(cfg, id++, attack, rng), attack});
  }
  return suite;
}

DetectionScore evaluate(const FloodSuite& suite, const DetectorConfig& cfg) {
  Baseline base;
  for (const auto& w : suite.baseline) base.add(measure(w, cfg));
  DetectionScore s;
  std::size_t hits = 0;
  std::size_t false_pos = 0;
  for (const auto& lw : suite.tests) {
    const auto r = classify_window(lw.window, base, cfg);
    const bool flagged = r.verdict == Verdict::kAttack;
    if (lw.attack) {
      ++s.attacks;
      hits += flagged;
    } else {
      ++s.benign;
      false_pos += flagged;
    }
  }
  s.recall = s.attacks ? static_cast<double>(hits) / static_cast<double>(s.attacks) : 1.0;
  s.false_positive_rate =
      s.benign ? static_cast<double>(false_pos) / static_cast<double>(s.benign) : 0.0;
  return s;
}

}  // namespace ts3ra::ddos
