#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "ts3ra/engine.hpp"

namespace ts3ra::engine {
namespace {

Scenario small() {
  Scenario s;
  s.network.devices = 40;
  s.network.duration_s = 30.0;
  s.slicenet.train_samples = 60;
  s.slicenet.epochs = 1;
  return s;
}

struct TraceRow {
  std::string time, kind, device, slice, sw, outcome;
};

std::vector<TraceRow> parse_trace(const std::string& text) {
  std::vector<TraceRow> rows;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    TraceRow r;
    std::istringstream ls(line);
    std::getline(ls, r.time, ',');
    std::getline(ls, r.kind, ',');
    std::getline(ls, r.device, ',');
    std::getline(ls, r.slice, ',');
    std::getline(ls, r.sw, ',');
    std::getline(ls, r.outcome, ',');
    rows.push_back(r);
  }
  return rows;
}

TEST(Metrics, Definitions) {
  std::array<SliceCounters, 3> c{};
  c[0].sent = 100;
  c[0].delivered = 90;
  c[0].dropped = 10;
  c[0].delivered_bits = 1e6;
  const auto r = collect_metrics(c, 10.0, 1e6);
  EXPECT_DOUBLE_EQ(r.slices[0].ptr, 0.9);
  EXPECT_DOUBLE_EQ(r.slices[0].plr, 0.1);
  EXPECT_DOUBLE_EQ(r.slices[0].throughput_bps, 1e5);
  EXPECT_TRUE(r.slices[1].degenerate);
  EXPECT_EQ(r.slices[1].ptr, 0.0);
}

TEST(Metrics, CsvLayout) {
  std::ostringstream os;
  write_metrics_csv(os, collect_metrics({}, 1.0, 1.0));
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, kMetricsHeader);
  std::vector<std::string> labels;
  while (std::getline(is, line)) labels.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(labels, (std::vector<std::string>{"S1", "S2", "S3", "TOTAL"}));
}

TEST(Mobility, StaticDeviceStays) {
  Mobility m{0.0, {10, 20}, {500, 500}};
  Rng rng(1);
  mobility_step(m, 0.1, 1000, 1000, rng);
  EXPECT_EQ(m.position.x, 10);
  EXPECT_EQ(m.position.y, 20);
}

TEST(Mobility, BoundedDisplacementAndArea) {
  Rng rng(2);
  Mobility m{4.0, {0, 0}, {999, 999}};
  for (int i = 0; i < 10000; ++i) {
    const Position before = m.position;
    mobility_step(m, 0.1, 1000, 1000, rng);
    const double d = std::hypot(m.position.x - before.x, m.position.y - before.y);
    EXPECT_LE(d, 4.0 * 0.1 + 1e-9);
    EXPECT_GE(m.position.x, 0.0);
    EXPECT_LE(m.position.x, 1000.0);
    EXPECT_GE(m.position.y, 0.0);
    EXPECT_LE(m.position.y, 1000.0);
  }
}

TEST(Engine, EmptyWorld) {
  Scenario s = small();
  s.network.devices = 0;
  const auto r = run_scenario(s);
  EXPECT_EQ(r.metrics.total.sent, 0u);
  EXPECT_EQ(r.metrics.total.delivered, 0u);
  EXPECT_EQ(r.sent_total, 0u);
}

TEST(Engine, InvalidScenarioRejectedBeforeRunning) {
  Scenario s = small();
  s.scheduler.mu2 = 0.9;
  EXPECT_THROW(run_scenario(s), InvariantError);
}

class EngineRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    RunOptions opt;
    opt.trace = &trace_;
    opt.detection = &detection_;
    opt.migrations = &migrations_;
    result_ = run_scenario(small(), std::move(opt));
    rows_ = parse_trace(trace_.str());
  }
  static inline std::ostringstream trace_;
  static inline std::ostringstream detection_;
  static inline std::ostringstream migrations_;
  static inline RunResult result_;
  static inline std::vector<TraceRow> rows_;
};

TEST_F(EngineRun, ConservationAtEnd) {
  for (const auto& m : result_.metrics.slices) {
    EXPECT_EQ(m.sent, m.delivered + m.dropped + m.in_flight);
    EXPECT_EQ(m.in_flight, 0u);
  }
  EXPECT_GT(result_.metrics.total.sent, 0u);
}

TEST_F(EngineRun, TraceTimesNondecreasing) {
  ASSERT_FALSE(rows_.empty());
  double prev = -1;
  for (const auto& r : rows_) {
    const double t = std::stod(r.time);
    ASSERT_GE(t, prev);
    prev = t;
  }
}

TEST_F(EngineRun, AuthenticationPrecedesTransmission) {
  std::set<std::string> authed;
  for (const auto& r : rows_) {
    if (r.kind == "auth" && r.outcome == "ok") authed.insert(r.device);
    if (r.kind == "transmit") ASSERT_TRUE(authed.count(r.device)) << r.device;
  }
}

TEST_F(EngineRun, NoDeliveriesFromUnauthenticatedOrQuarantined) {
  EXPECT_EQ(result_.metrics.global.unauthenticated_deliveries, 0u);
  std::map<std::string, double> quarantined_at;
  for (const auto& r : rows_) {
    if (r.outcome == "quarantined" && r.kind == "window_close") {
      quarantined_at.emplace(r.device, std::stod(r.time));
    }
    if (r.kind == "deliver") {
      const auto it = quarantined_at.find(r.device);
      if (it != quarantined_at.end()) ADD_FAILURE() << "delivery after quarantine " << r.device;
    }
  }
}

TEST_F(EngineRun, QuarantinedTransmitsBecomeDrops) {
  std::set<std::string> blocked;
  std::size_t drops = 0;
  for (const auto& r : rows_) {
    if (r.kind == "window_close" && r.outcome == "quarantined") blocked.insert(r.device);
    if (blocked.count(r.device) && r.kind == "drop" && r.outcome == "quarantined") ++drops;
  }
  if (!blocked.empty()) EXPECT_GT(drops, 0u);
}

TEST_F(EngineRun, EachDeliveryCountsOnce) {
  std::size_t delivered = 0;
  for (const auto& r : rows_) delivered += r.kind == "deliver";
  EXPECT_EQ(delivered, result_.metrics.total.delivered + result_.metrics.global.illegitimate_deliveries);
}

TEST(Engine, Deterministic) {
  auto once = [] {
    std::ostringstream trace;
    std::ostringstream metrics;
    RunOptions opt;
    opt.trace = &trace;
    const auto r = run_scenario(small(), std::move(opt));
    write_metrics_csv(metrics, r.metrics);
    return trace.str() + metrics.str();
  };
  EXPECT_EQ(once(), once());
}

}  // namespace
}  // namespace ts3ra::engine
