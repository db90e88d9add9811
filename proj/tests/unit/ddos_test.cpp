#include <gtest/gtest.h>

#include <cmath>

#include "oracles/renyi_oracle.hpp"
#include "ts3ra/ddos.hpp"

namespace ts3ra::ddos {
namespace {

TEST(Renyi, UniformGivesLogK) {
  const std::vector<double> p(8, 0.125);
  for (double a : {0.5, 2.0, 3.0, 7.0}) EXPECT_NEAR(renyi_entropy(p, a), 3.0, 1e-12);
}

TEST(Renyi, CertaintyIsZero) {
  const std::vector<double> p{1.0};
  EXPECT_EQ(renyi_entropy(p, 2.0), 0.0);
}

TEST(Renyi, KnownCollisionEntropy) {
  const std::vector<double> p{0.5, 0.25, 0.25};
  EXPECT_NEAR(renyi_entropy(p, 2.0), oracle::renyi_big(p, 2.0), 1e-12);
  EXPECT_NEAR(renyi_entropy(p, 2.0), 1.41504, 1e-5);
}

TEST(Renyi, RejectsBadInput) {
  const std::vector<double> p{0.5, 0.25};
  EXPECT_THROW(renyi_entropy(p, 2.0), InvariantError);
  const std::vector<double> q{0.5, 0.5};
  EXPECT_THROW(renyi_entropy(q, 1.0), InvariantError);
  EXPECT_THROW(renyi_entropy(q, 0.0), InvariantError);
}

TEST(Renyi, MatchesOracleAndIsMonotone) {
  Rng rng(1);
  for (int c = 0; c < 100; ++c) {
    std::vector<std::uint64_t> counts(1 + rng.below(40));
    for (auto& k : counts) k = rng.below(1000);
    counts[0] += 1;
    const auto p = normalize_counts(counts);
    double prev = std::numeric_limits<double>::infinity();
    for (double a : {0.5, 2.0, 3.0}) {
      const double h = renyi_entropy(p, a);
      EXPECT_NEAR(h, oracle::renyi_big(p, a), 1e-9);
      EXPECT_LE(h, prev + 1e-12);
      prev = h;
    }
  }
}

TrafficWindow uniform_window(std::size_t sources, std::size_t per_source, Rng& rng) {
  WindowBuilder b(0, 0.0, 1.0);
  double t = 0.0;
  for (std::size_t k = 0; k < per_source; ++k) {
    for (std::uint32_t s = 0; s < sources; ++s) {
      t += rng.exponential(1.0 / static_cast<double>(sources * per_source));
      b.add(s, t, 512);
    }
  }
  return b.take();
}

Baseline baseline_of(std::size_t windows, Rng& rng, const DetectorConfig& cfg) {
  Baseline base;
  for (std::size_t i = 0; i < windows; ++i) base.add(measure(uniform_window(50, 10, rng), cfg));
  return base;
}

TEST(Classify, FloodAndBenignAndSmallWindows) {
  Rng rng(2);
  const DetectorConfig cfg;
  const Baseline base = baseline_of(20, rng, cfg);

  WindowBuilder flood(1, 1.0, 1.0);
  double t = 1.0;
  for (int i = 0; i < 900; ++i) flood.add(0, t += 1e-4, 512);
  for (std::uint32_t s = 1; s < 50; ++s) {
    for (int k = 0; k < 2; ++k) flood.add(s, t += 1e-4, 512);
  }
  const TrafficWindow fw = flood.take();
  const auto fr = classify_window(fw, base, cfg);
  EXPECT_EQ(fr.verdict, Verdict::kAttack);
  const auto blocked = quarantine(fr, fw, cfg.dominance_factor);
  ASSERT_EQ(blocked.size(), 1u);
  EXPECT_EQ(blocked[0], 0u);

  const TrafficWindow bw = uniform_window(50, 10, rng);
  const auto br = classify_window(bw, base, cfg);
  EXPECT_EQ(br.verdict, Verdict::kBenign);
  EXPECT_TRUE(quarantine(br, bw, cfg.dominance_factor).empty());

  WindowBuilder tiny(2, 2.0, 1.0);
  for (std::uint32_t s = 0; s < 5; ++s) tiny.add(s, 2.0 + s * 0.1, 512);
  EXPECT_EQ(classify_window(tiny.take(), base, cfg).verdict, Verdict::kInconclusive);
}

TEST(Classify, RequiresBaseline) {
  Rng rng(3);
  const DetectorConfig cfg;
  const Baseline base = baseline_of(3, rng, cfg);
  EXPECT_THROW(classify_window(uniform_window(50, 10, rng), base, cfg), InvariantError);
}

TEST(Ewma, ConstantStepAndDegenerate) {
  const std::vector<double> flat(20, 7.0);
  EXPECT_DOUBLE_EQ(predict_bandwidth(SwitchId{0}, flat).predicted_usage_bps, 7.0);

  const double lambda = 0.3;
  const double b = 100.0;
  Ewma e(lambda);
  e.update(0.0);
  const auto needed = static_cast<int>(std::ceil(std::log(0.01) / std::log(1 - lambda)));
  double prev = e.value();
  for (int i = 0; i < needed; ++i) {
    const double v = e.update(b);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_GE(prev, 0.99 * b);

  Ewma last(1.0);
  last.update(3.0);
  EXPECT_EQ(last.update(9.0), 9.0);
  EXPECT_THROW(Ewma(0.0), InvariantError);
}

TEST(Detector, LearnsThenClassifies) {
  Rng rng(4);
  SwitchDetector d;
  for (int i = 0; i < 10; ++i) EXPECT_TRUE(d.close_window(uniform_window(50, 10, rng)).learning);
  EXPECT_FALSE(d.close_window(uniform_window(50, 10, rng)).learning);
}

TEST(FloodSuite, MeetsDetectionTarget) {
  Rng rng(5);
  const auto suite = synthetic_flood_suite({}, rng);
  const auto score = evaluate(suite, {});
  EXPECT_GE(score.recall, 0.9);
  EXPECT_LE(score.false_positive_rate, 0.05);
  EXPECT_GT(score.attacks, 50u);
  EXPECT_GT(score.benign, 50u);
}

}  // namespace
}  // namespace ts3ra::ddos
