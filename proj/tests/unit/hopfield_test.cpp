#include <gtest/gtest.h>

#include <sstream>

#include "oracles/storkey_oracle.hpp"
#include "ts3ra/hopfield.hpp"
#include "ts3ra/rng.hpp"

namespace ts3ra::hopfield {
namespace {

WeightMatrix from_rows(std::vector<std::vector<double>> rows) {
  WeightMatrix w = WeightMatrix::zeros(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) w(i, j) = rows[i][j];
  }
  return w;
}

TEST(WeightedSum, ZeroMatrixAndDotProduct) {
  const StatePattern st{1, 1, 1};
  EXPECT_EQ(weighted_sum(WeightMatrix::zeros(3), st, 1), 0.0);
  const auto w = from_rows({{0, 0.5, -0.5}, {0.5, 0, 0}, {-0.5, 0, 0}});
  EXPECT_DOUBLE_EQ(weighted_sum(w, st, 0), 0.0);
}

TEST(WeightedSum, GlobalFlipNegates) {
  const auto w = from_rows({{0, 0.3, -0.7}, {0.3, 0, 0.2}, {-0.7, 0.2, 0}});
  const StatePattern st{1, -1, 1};
  const StatePattern neg{-1, 1, -1};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(weighted_sum(w, neg, i), -weighted_sum(w, st, i));
  }
}

TEST(LocalField, VacuousAndHandCase) {
  EXPECT_EQ(local_field(WeightMatrix::zeros(2), StatePattern{1, 1}, 0, 1), 0.0);
  const auto w = from_rows(
      {{0, .25, .25, 0}, {.25, 0, 0, 0}, {.25, 0, 0, 0}, {0, 0, 0, 0}});
  const StatePattern xi{1, -1, 1, -1};
  // Nodes 1 and 2 (one-based) excluded: .25 * 1 + 0 * (-1).
  EXPECT_DOUBLE_EQ(local_field(w, xi, 0, 1), 0.25);
  EXPECT_THROW(local_field(w, xi, 1, 1), InvariantError);
}

TEST(Storkey, FirstPatternFromZero) {
  const auto w = storkey_update(WeightMatrix::zeros(2), StatePattern{1, 1});
  EXPECT_DOUBLE_EQ(w(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(w(1, 0), 0.5);
  EXPECT_EQ(w(0, 0), 0.0);
  EXPECT_EQ(w(1, 1), 0.0);
}

TEST(Storkey, SignFlipInvariance) {
  Rng rng(1);
  for (int c = 0; c < 20; ++c) {
    const std::size_t n = 3 + rng.below(6);
    WeightMatrix base = WeightMatrix::zeros(n);
    StatePattern warm(n);
    for (auto& v : warm) v = rng.bernoulli(0.5) ? 1 : -1;
    base = storkey_update(base, warm);
    StatePattern xi(n);
    for (auto& v : xi) v = rng.bernoulli(0.5) ? 1 : -1;
    StatePattern neg = xi;
    for (auto& v : neg) v = static_cast<std::int8_t>(-v);
    EXPECT_EQ(storkey_update(base, xi), storkey_update(base, neg));
  }
}

TEST(Storkey, MatchesBruteForceOracle) {
  Rng rng(2);
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = 2 + rng.below(7);
    WeightMatrix w = WeightMatrix::zeros(n);
    std::vector<std::vector<long double>> ref(n, std::vector<long double>(n, 0.0L));
    const std::size_t patterns = 1 + rng.below(4);
    for (std::size_t p = 0; p < patterns; ++p) {
      StatePattern xi(n);
      std::vector<int> xi_int(n);
      for (std::size_t i = 0; i < n; ++i) {
        xi[i] = rng.bernoulli(0.5) ? 1 : -1;
        xi_int[i] = xi[i];
      }
      w = storkey_update(w, xi);
      ref = oracle::storkey_brute(ref, xi_int);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_NEAR(w(i, j), static_cast<double>(ref[i][j]), 1e-12);
        EXPECT_EQ(w(i, j), w(j, i));
      }
      EXPECT_EQ(w(i, i), 0.0);
    }
  }
}

TEST(UpdateState, SignConvention) {
  const auto w = from_rows({{0, 1}, {1, 0}});
  // U_0 = st_1 = 1; threshold exactly 1 gives +1, slightly above gives -1.
  EXPECT_EQ(update_state(w, ThresholdVector::uniform(2, 1.0), StatePattern{-1, 1})[0], 1);
  EXPECT_EQ(update_state(w, ThresholdVector::uniform(2, 1.0 + 1e-9), StatePattern{-1, 1})[0], -1);
  const StatePattern zero_field =
      update_state(WeightMatrix::zeros(3), ThresholdVector::zeros(3), StatePattern{-1, -1, 1});
  EXPECT_EQ(zero_field, (StatePattern{1, 1, 1}));
}

TEST(Encoding, UnrolledAndRoundTrip) {
  const StatePattern urllc = encode_pattern({0, 1, 0});
  EXPECT_EQ(urllc, (StatePattern{-1, -1, -1, -1, 1, 1, 1, 1, -1, -1, -1, -1}));
  for (int m = 0; m < 8; ++m) {
    const Indicator code{static_cast<std::uint8_t>((m >> 2) & 1),
                         static_cast<std::uint8_t>((m >> 1) & 1),
                         static_cast<std::uint8_t>(m & 1)};
    EXPECT_EQ(decode_pattern(encode_pattern(code)), code);
  }
}

TEST(Encoding, StoredPatternsAreFarApart) {
  const auto net = HopfieldNet::trained();
  const auto& ps = net.patterns();
  for (std::size_t a = 0; a < ps.size(); ++a) {
    for (std::size_t b = a + 1; b < ps.size(); ++b) EXPECT_GE(hamming(ps[a], ps[b]), 4u);
  }
}

TEST(Recall, FixedPointsAndSingleFlips) {
  const auto net = HopfieldNet::trained();
  for (const auto& p : net.patterns()) {
    const auto r = recall(net.weights(), net.thresholds(), p);
    EXPECT_EQ(r.state, p);
    EXPECT_EQ(r.iterations, 1u);
    EXPECT_EQ(r.status, RecallStatus::kFixedPoint);
    for (std::size_t bit = 0; bit < p.size(); ++bit) {
      StatePattern probe = p;
      probe[bit] = static_cast<std::int8_t>(-probe[bit]);
      const auto rr = recall(net.weights(), net.thresholds(), probe, 10);
      EXPECT_EQ(rr.state, p) << "bit " << bit;
    }
  }
  EXPECT_THROW(recall(net.weights(), net.thresholds(), net.patterns()[0], 0), InvariantError);
}

TEST(Classify, ServiceIndicators) {
  const auto net = HopfieldNet::trained();
  EXPECT_EQ(net.classify({0, 1, 0}).slice, ServiceType::kUrllc);
  EXPECT_EQ(net.classify({1, 1, 1}).slice, ServiceType::kMmtc);
  EXPECT_EQ(net.classify({0, 0, 1}).slice, ServiceType::kEmbb);
}

TEST(Allocate, GrantsBundleOfRecalledSlice) {
  const auto net = HopfieldNet::trained();
  ResourcePool pool{1e9, 100, 100};
  AllocationRequest req;
  req.slice_indicator = {1, 1, 1};
  req.sinr_db = 10;
  req.slice_capacity_bps = 1e6;
  const auto a = allocate_resources(net, req, pool);
  EXPECT_TRUE(a.accepted);
  EXPECT_EQ(a.slice, ServiceType::kMmtc);
  EXPECT_GT(a.granted.communication_bps, 0.0);
  EXPECT_LT(pool.communication_bps, 1e9);
}

TEST(Allocate, CorruptedBitStillS1) {
  const auto net = HopfieldNet::trained();
  StatePattern probe = encode_pattern({0, 0, 1});
  probe[0] = 1;  // corrupt one bit of S1's code
  const auto r = recall(net.weights(), net.thresholds(), probe);
  EXPECT_EQ(decode_pattern(r.state), (Indicator{0, 0, 1}));
}

TEST(Allocate, ExhaustedPoolRejects) {
  const auto net = HopfieldNet::trained();
  ResourcePool pool{0, 100, 100};
  AllocationRequest req;
  req.slice_indicator = {0, 1, 0};
  EXPECT_FALSE(allocate_resources(net, req, pool).accepted);
}

TEST(HopfieldNet, SaveLoadRoundTrip) {
  const auto net = HopfieldNet::trained();
  std::stringstream ss;
  net.save(ss);
  const auto back = HopfieldNet::load(ss);
  EXPECT_EQ(back.weights(), net.weights());
  EXPECT_EQ(back.patterns(), net.patterns());
}

TEST(WeightMatrix, ValidateRejectsAsymmetry) {
  auto w = WeightMatrix::zeros(3);
  w(0, 1) = 1.0;
  EXPECT_THROW(w.validate(), InvariantError);
  w(1, 0) = 1.0;
  EXPECT_NO_THROW(w.validate());
  w(2, 2) = 0.1;
  EXPECT_THROW(w.validate(), InvariantError);
}

}  // namespace
}  // namespace ts3ra::hopfield
