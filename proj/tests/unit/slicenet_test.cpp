#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ts3ra/slicenet.hpp"

namespace ts3ra::slicenet {
namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1, double hi = 1) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

void zero(Param& p) { p.value.fill(0.0); }

TEST(ConvStep, NegativeInputCollapsesToLnBias) {
  Rng rng(1);
  auto p = ConvStepParams::init(3, 1, 4, 4, rng);
  for (std::size_t j = 0; j < 4; ++j) p.ln_bias.value(0, j) = 0.1 * static_cast<double>(j);
  const Matrix x = random_matrix(6, 4, rng, -2.0, -0.1);
  const Matrix y = conv_step(p, x);
  ASSERT_EQ(y.rows, 6u);
  for (std::size_t i = 0; i < y.rows; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(y(i, j), 0.1 * static_cast<double>(j));
  }
}

TEST(ConvStep, SamePaddingKeepsLengthAndNormalises) {
  Rng rng(2);
  for (std::size_t k : {1u, 3u, 15u}) {
    auto p = ConvStepParams::init(k, 1, 5, 6, rng);
    const Matrix x = random_matrix(7, 5, rng);
    const Matrix y = conv_step(p, x);
    EXPECT_EQ(y.rows, 7u);
    EXPECT_EQ(y.cols, 6u);
    // Rows before normalisation, rebuilt from the primitive ops.
    Tape t;
    Var pre = t.matmul(t.depthwise_conv(t.relu(t.constant(x)), t.parameter(p.depthwise), 1),
                       t.parameter(p.pointwise));
    const Matrix& raw = t.value(pre);
    // gain 1, bias 0 at init: mean 0, variance v / (v + eps) for raw variance v.
    for (std::size_t i = 0; i < y.rows; ++i) {
      auto stats = [](std::span<const double> r) {
        double mean = 0;
        for (double v : r) mean += v;
        mean /= static_cast<double>(r.size());
        double var = 0;
        for (double v : r) var += (v - mean) * (v - mean);
        return std::pair{mean, var / static_cast<double>(r.size())};
      };
      const auto [mean, var] = stats(y.row(i));
      const double v = stats(raw.row(i)).second;
      EXPECT_NEAR(mean, 0.0, 1e-6);
      EXPECT_NEAR(var, v / (v + p.ln_eps), 1e-6);
    }
  }
}

TEST(ConvModule, InferenceIsDeterministicStack) {
  Rng rng(3);
  auto p = ConvModuleParams::init(8, {3, 3, 15, 15}, {1, 1, 1, 1}, rng);
  const Matrix x = random_matrix(7, 8, rng);
  const Matrix got = conv_module(p, x, Mode::kInference, nullptr);
  Matrix h1 = conv_step(p.steps[0], x);
  Matrix h2 = conv_step(p.steps[1], h1);
  for (std::size_t i = 0; i < h2.size(); ++i) h2.data[i] += x.data[i];
  Matrix h3 = conv_step(p.steps[2], h2);
  Matrix h4 = conv_step(p.steps[3], h3);
  for (std::size_t i = 0; i < h4.size(); ++i) h4.data[i] += x.data[i];
  for (std::size_t i = 0; i < h4.size(); ++i) EXPECT_DOUBLE_EQ(got.data[i], h4.data[i]);
  EXPECT_EQ(conv_module(p, x, Mode::kInference, nullptr).data, got.data);
}

TEST(ConvModule, DropoutZeroesHalf) {
  Rng rng(4);
  auto p = ConvModuleParams::init(8, {3, 3, 15, 15}, {1, 1, 1, 1}, rng);
  DropoutStats stats;
  Rng drop(5);
  const Matrix x = random_matrix(7, 8, rng);
  while (stats.units < 10000) conv_module(p, x, Mode::kTraining, &drop, &stats);
  const double frac = static_cast<double>(stats.zeroed) / static_cast<double>(stats.units);
  EXPECT_NEAR(frac, 0.5, 0.02);
}

TEST(ConvModule, ZeroKernelsPassResidualThrough) {
  Rng rng(6);
  auto p = ConvModuleParams::init(4, {3, 3, 3, 3}, {1, 1, 1, 1}, rng);
  for (auto& s : p.steps) {
    zero(s.depthwise);
    zero(s.pointwise);
  }
  const Matrix x = random_matrix(5, 4, rng);
  // Every step emits the LN bias (zero), so h2 = x and h4 = x.
  const Matrix y = conv_module(p, x, Mode::kInference, nullptr);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y.data[i], x.data[i]);
}

TEST(Attention, RowsSumToOne) {
  Rng rng(7);
  auto p = AttentionParams::init(8, 5, 16, rng);
  const Matrix src = random_matrix(6, 8, rng);
  const Matrix tgt = random_matrix(4, 8, rng);
  const auto [out, w] = attention_module(p, src, tgt);
  EXPECT_EQ(out.rows, 4u);
  for (std::size_t i = 0; i < w.rows; ++i) {
    double s = 0;
    for (double v : w.row(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Attention, SingleSourceReturnsItsRow) {
  Rng rng(8);
  auto p = AttentionParams::init(8, 5, 16, rng);
  const Matrix src = random_matrix(1, 8, rng);
  const Matrix tgt = random_matrix(3, 8, rng);
  const auto [out, w] = attention_module(p, src, tgt);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(w(i, 0), 1.0);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(out(i, j), src(0, j));
  }
}

TEST(Attention, SourcePermutationPermutesWeights) {
  Rng rng(9);
  auto p = AttentionParams::init(8, 5, 16, rng);
  const Matrix src = random_matrix(4, 8, rng);
  const Matrix tgt = random_matrix(3, 8, rng);
  const std::array<std::size_t, 4> perm{2, 0, 3, 1};
  Matrix permuted(4, 8);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 8; ++c) permuted(r, c) = src(perm[r], c);
  }
  const auto [o1, w1] = attention_module(p, src, tgt);
  const auto [o2, w2] = attention_module(p, permuted, tgt);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(w2(i, r), w1(i, perm[r]), 1e-12);
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(o2(i, c), o1(i, c), 1e-12);
  }
}

TEST(Softmax, RowsSumToOneEvenForLargeLogits) {
  Rng rng(10);
  Matrix z = random_matrix(50, 3, rng, -800, 800);
  const Matrix p = nn::softmax_rows(z);
  for (std::size_t i = 0; i < p.rows; ++i) {
    double s = 0;
    for (double v : p.row(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(SliceNet, MixerWidthAndEmptyHistory) {
  Rng rng(11);
  SliceNet net(SliceNetConfig{}, rng);
  Tape tape;
  const std::array<double, 7> f{1, 0, 0, 0.5, 0.3, 0.7, 0.1};
  const auto pass = net.forward(tape, f, {}, Mode::kInference, nullptr);
  const Matrix& enc = tape.value(pass.encoded);
  const Matrix& mix = tape.value(pass.mix);
  EXPECT_EQ(mix.cols, enc.cols + net.config().history_width);
  for (std::size_t i = 0; i < mix.rows; ++i) {
    for (std::size_t j = 0; j < enc.cols; ++j) EXPECT_DOUBLE_EQ(mix(i, j), enc(i, j));
    for (std::size_t j = enc.cols; j < mix.cols; ++j) EXPECT_DOUBLE_EQ(mix(i, j), 0.0);
  }
}

TEST(SliceNet, FiveFeatureInputGivesThreeLogits) {
  Rng rng(12);
  SliceNetConfig cfg;
  cfg.seq_len = 5;
  SliceNet net(cfg, rng);
  const std::array<double, 5> f{0.1, 0.2, 0.3, 0.4, 0.5};
  const Matrix logits = net.encode_mix_decode(f);
  EXPECT_EQ(logits.rows, 1u);
  EXPECT_EQ(logits.cols, 3u);
}

TEST(SliceNet, DecisionIsAKnownCodeAndDeterministic) {
  Rng rng(13);
  SliceNet net(SliceNetConfig{}, rng);
  Rng feat(14);
  for (int i = 0; i < 50; ++i) {
    const auto fv = SliceFeatureVector::make(service_from_index(feat.below(3)), feat.uniform(),
                                             feat.next_u64(), feat.uniform(), feat.uniform());
    const auto a = net.select_slice(fv);
    const auto b = net.select_slice(fv);
    EXPECT_TRUE(service_of_indicator(a.indicator).has_value());
    EXPECT_EQ(a.indicator, b.indicator);
    EXPECT_EQ(a.probabilities, b.probabilities);
  }
}

TEST(SliceNet, SaveLoadRoundTrip) {
  Rng rng(15);
  SliceNet net(SliceNetConfig{}, rng);
  std::stringstream ss;
  net.save(ss);
  SliceNet back = SliceNet::load(ss);
  const std::array<double, 7> f{0, 1, 0, 0.9, 0.2, 0.3, 0.4};
  EXPECT_EQ(net.encode_mix_decode(f).data, back.encode_mix_decode(f).data);
  std::stringstream bad("not a model");
  EXPECT_ANY_THROW(SliceNet::load(bad));
}

TEST(FeatureVector, Validation) {
  auto fv = SliceFeatureVector::make(ServiceType::kUrllc, 0.5, 123, 0.5, 0.5);
  EXPECT_NO_THROW(fv.validate());
  EXPECT_EQ(fv.service_one_hot, (std::array<double, 3>{0, 1, 0}));
  fv.fair_sla = 1.5;
  EXPECT_THROW(fv.validate(), InvariantError);
}

// Central differences on a small tape model built from the same ops the
// network uses: 4 x 8 input, depthwise conv, pointwise, layer norm, pooled
// dense layer and cross-entropy.
TEST(Gradients, ToyModelMatchesFiniteDifferences) {
  Rng rng(16);
  const Matrix x = random_matrix(4, 8, rng);
  Param dw(random_matrix(3, 8, rng));
  Param pw(random_matrix(8, 8, rng));
  Param gain(random_matrix(1, 8, rng, 0.5, 1.5));
  Param bias(random_matrix(1, 8, rng));
  Param out(random_matrix(8, 3, rng));
  std::vector<Param*> params{&dw, &pw, &gain, &bias, &out};
  auto loss_of = [&](bool backward) {
    Tape t;
    Var h = t.depthwise_conv(t.constant(x), t.parameter(dw), 1);
    h = t.matmul(h, t.parameter(pw));
    h = t.layer_norm(h, t.parameter(gain), t.parameter(bias), 1e-5);
    Var z = t.matmul(t.mean_rows(h), t.parameter(out));
    Var l = t.cross_entropy(z, 1);
    if (backward) t.backward(l);
    return t.value(l)(0, 0);
  };
  for (auto* p : params) p->zero_grad();
  loss_of(true);
  const double h = 1e-5;
  double worst = 0;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value.data[i];
      p->value.data[i] = keep + h;
      const double up = loss_of(false);
      p->value.data[i] = keep - h;
      const double down = loss_of(false);
      p->value.data[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad.data[i];
      const double rel =
          std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
      worst = std::max(worst, rel);
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Training, SingleStepReducesSampleLoss) {
  Rng rng(17);
  SliceNet net(SliceNetConfig{}, rng);
  LabeledSample s{SliceFeatureVector::make(ServiceType::kUrllc, 0.8, 5, 0.3, 0.5), 1};
  auto loss = [&] {
    Tape t;
    const auto v = s.features.values();
    const auto pass = net.forward(t, v, {}, Mode::kInference, nullptr);
    return t.value(t.cross_entropy(pass.logits, s.label))(0, 0);
  };
  const double before = loss();
  Tape t;
  for (auto* p : net.parameters()) p->zero_grad();
  const auto v = s.features.values();
  const auto pass = net.forward(t, v, {}, Mode::kInference, nullptr);
  t.backward(t.cross_entropy(pass.logits, s.label));
  for (auto* p : net.parameters()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value.data[i] -= 1e-3 * p->grad.data[i];
  }
  EXPECT_LT(loss(), before);
}

TEST(Training, RejectsOutOfRangeRate) {
  Rng rng(18);
  SliceNet net(SliceNetConfig{}, rng);
  Rng d(19);
  const auto data = synthetic_dataset(10, d);
  EXPECT_ANY_THROW(train(net, data, {1, 0.5, 4}, d));
}

TEST(Training, PureUrllcRowAfterTraining) {
  Rng rng(20);
  SliceNet net(SliceNetConfig{}, rng);
  Rng d(21);
  const auto data = synthetic_dataset(300, d);
  train(net, data, {4, 0.01, 16}, d);
  const auto fv = SliceFeatureVector::make(ServiceType::kUrllc, 0.9, 77, 0.35, 0.5);
  EXPECT_EQ(net.select_slice(fv).indicator, (Indicator{0, 1, 0}));
}

TEST(Dataset, CsvRoundTrip) {
  Rng d(22);
  const auto data = synthetic_dataset(20, d);
  std::stringstream ss;
  write_dataset_csv(ss, data);
  const auto back = read_dataset_csv(ss);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].label, data[i].label);
    EXPECT_EQ(back[i].features.values(), data[i].features.values());
  }
}

}  // namespace
}  // namespace ts3ra::slicenet
