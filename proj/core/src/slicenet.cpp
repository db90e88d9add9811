#include "ts3ra/slicenet.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "ts3ra/model_io.hpp"

namespace ts3ra::slicenet {

namespace {

Matrix uniform_matrix(std::size_t r, std::size_t c, double bound, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

// -- features ----------------------------------------------------------------

std::array<double, kFeatureCount> SliceFeatureVector::values() const {
  return {service_one_hot[0], service_one_hot[1], service_one_hot[2],
          fair_sla,           imsi,               slice_capacity,
          mobility};
}

void SliceFeatureVector::validate() const {
  for (double v : values()) {
    if (!in_unit(v)) {
      throw InvariantError("SliceFeatureVector: component outside [0, 1]");
    }
  }
  const double sum =
      service_one_hot[0] + service_one_hot[1] + service_one_hot[2];
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InvariantError("SliceFeatureVector: one-hot must sum to 1");
  }
}

SliceFeatureVector SliceFeatureVector::make(ServiceType service,
                                            double fair_sla,
                                            std::uint64_t imsi_hash,
                                            double slice_capacity_norm,
                                            double mobility_norm) {
  SliceFeatureVector f;
  f.service_one_hot[slice_index(service)] = 1.0;
  f.fair_sla = std::clamp(fair_sla, 0.0, 1.0);
  f.imsi = static_cast<double>(imsi_hash >> 11) * 0x1.0p-53;
  f.slice_capacity = std::clamp(slice_capacity_norm, 0.0, 1.0);
  f.mobility = std::clamp(mobility_norm, 0.0, 1.0);
  return f;
}

// -- layers ------------------------------------------------------------------

ConvStepParams ConvStepParams::init(std::size_t kernel, std::size_t dilation,
                                    std::size_t in, std::size_t out,
                                    Rng& rng) {
  if (kernel % 2 == 0) throw nn::ShapeError("conv step kernel must be odd");
  ConvStepParams p;
  p.kernel = kernel;
  p.dilation = dilation;
  p.depthwise = Param(uniform_matrix(
      kernel, in, 1.0 / std::sqrt(static_cast<double>(kernel)), rng));
  p.pointwise = Param(
      uniform_matrix(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng));
  p.ln_gain = Param(Matrix(1, out, 1.0));
  p.ln_bias = Param(Matrix(1, out, 0.0));
  return p;
}

void ConvStepParams::collect(std::vector<std::pair<std::string, Param*>>& out,
                             const std::string& prefix) {
  out.emplace_back(prefix + ".depthwise", &depthwise);
  out.emplace_back(prefix + ".pointwise", &pointwise);
  out.emplace_back(prefix + ".ln_gain", &ln_gain);
  out.emplace_back(prefix + ".ln_bias", &ln_bias);
}

ConvModuleParams ConvModuleParams::init(
    std::size_t width, const std::array<std::size_t, 4>& kernels,
    const std::array<std::size_t, 4>& dilations, Rng& rng) {
  ConvModuleParams p;
  for (std::size_t i = 0; i < 4; ++i) {
    p.steps[i] = ConvStepParams::init(kernels[i], dilations[i], width, width,
                                      rng);
  }
  return p;
}

void ConvModuleParams::collect(
    std::vector<std::pair<std::string, Param*>>& out,
    const std::string& prefix) {
  for (std::size_t i = 0; i < 4; ++i) {
    steps[i].collect(out, prefix + ".h" + std::to_string(i + 1));
  }
}

AttentionParams AttentionParams::init(std::size_t width, std::size_t kernel,
                                      std::size_t max_len, Rng& rng) {
  AttentionParams p;
  p.query_in = ConvStepParams::init(kernel, 1, width, width, rng);
  p.query_out = ConvStepParams::init(kernel, 1, width, width, rng);
  p.timing = timing_signal(max_len, width);
  return p;
}

void AttentionParams::collect(std::vector<std::pair<std::string, Param*>>& out,
                              const std::string& prefix) {
  query_in.collect(out, prefix + ".query_in");
  query_out.collect(out, prefix + ".query_out");
}

Matrix timing_signal(std::size_t max_len, std::size_t width) {
  Matrix t(max_len, width);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < width; ++i) {
      const double exponent =
          static_cast<double>(2 * (i / 2)) / static_cast<double>(width);
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, exponent);
      t(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return t;
}

Var conv_step(Tape& tape, ConvStepParams& p, Var x) {
  if (tape.value(x).cols != p.in_width()) {
    throw nn::ShapeError("conv_step: input width " +
                         std::to_string(tape.value(x).cols) + " != " +
                         std::to_string(p.in_width()));
  }
  Var r = tape.relu(x);
  Var d = tape.depthwise_conv(r, tape.parameter(p.depthwise), p.dilation);
  Var pw = tape.matmul(d, tape.parameter(p.pointwise));
  return tape.layer_norm(pw, tape.parameter(p.ln_gain),
                         tape.parameter(p.ln_bias), p.ln_eps);
}

Var conv_module(Tape& tape, ConvModuleParams& p, Var x, Mode mode, Rng* rng,
                DropoutStats* stats) {
  Var h1 = conv_step(tape, p.steps[0], x);
  Var h2 = tape.add(x, conv_step(tape, p.steps[1], h1));
  Var h3 = conv_step(tape, p.steps[2], h2);
  Var h4 = tape.add(x, conv_step(tape, p.steps[3], h3));
  if (mode == Mode::kInference) return h4;
  if (rng == nullptr) {
    throw std::invalid_argument("conv_module: training mode needs an rng");
  }
  std::vector<std::uint8_t> keep(tape.value(h4).size());
  std::uint64_t zeroed = 0;
  for (auto& k : keep) {
    k = rng->bernoulli(p.keep_prob) ? 1 : 0;
    zeroed += k == 0;
  }
  if (stats != nullptr) {
    ++stats->applications;
    stats->units += keep.size();
    stats->zeroed += zeroed;
  }
  return tape.mask(h4, keep, p.keep_prob);
}

AttentionVars attention_module(Tape& tape, AttentionParams& p, Var source,
                               Var target) {
  const Matrix& tgt = tape.value(target);
  const Matrix& src = tape.value(source);
  if (tgt.rows > p.timing.rows) {
    throw nn::ShapeError("attention: target longer than timing signal");
  }
  if (tgt.cols != p.timing.cols || src.cols != tgt.cols) {
    throw nn::ShapeError("attention: width mismatch");
  }
  Matrix timing(tgt.rows, tgt.cols);
  std::copy_n(p.timing.data.begin(), timing.size(), timing.data.begin());
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(tgt.cols));

  Var with_time = tape.add(target, tape.constant(std::move(timing)));
  Var q = conv_step(tape, p.query_in, with_time);
  Var q2 = conv_step(tape, p.query_out, q);
  Var scores = tape.scale(tape.matmul_bt(q2, source), inv_sqrt_d);
  Var weights = tape.softmax_rows(scores);
  Var out = tape.matmul(weights, source);
  return {out, weights};
}

Matrix conv_step(ConvStepParams& p, const Matrix& x) {
  Tape t;
  return t.value(conv_step(t, p, t.constant(x)));
}

Matrix conv_module(ConvModuleParams& p, const Matrix& x, Mode mode, Rng* rng,
                   DropoutStats* stats) {
  Tape t;
  return t.value(conv_module(t, p, t.constant(x), mode, rng, stats));
}

std::pair<Matrix, Matrix> attention_module(AttentionParams& p,
                                           const Matrix& source,
                                           const Matrix& target) {
  Tape t;
  auto vars = attention_module(t, p, t.constant(source), t.constant(target));
  return {t.value(vars.output), t.value(vars.weights)};
}

// -- model -------------------------------------------------------------------

SliceNet::SliceNet(SliceNetConfig config, Rng& rng) : config_(config) {
  const std::size_t w = config_.width;
  embed_scale_ = Param(uniform_matrix(config_.seq_len, w, 1.0, rng));
  embed_bias_ = Param(uniform_matrix(config_.seq_len, w, 0.1, rng));
  encoder_ =
      ConvModuleParams::init(w, config_.kernels, config_.dilations, rng);
  encoder_.keep_prob = config_.keep_prob;
  history_proj_ = Param(uniform_matrix(
      kClassCount, config_.history_width, 1.0 / std::sqrt(3.0), rng));
  mixer_ = ConvStepParams::init(3, 1, w + config_.history_width, w, rng);
  decoder_ =
      ConvModuleParams::init(w, config_.kernels, config_.dilations, rng);
  decoder_.keep_prob = config_.keep_prob;
  attention_ = AttentionParams::init(w, config_.attention_kernel,
                                     config_.seq_len, rng);
  out_w_ = Param(uniform_matrix(w, kClassCount,
                                1.0 / std::sqrt(static_cast<double>(w)), rng));
  out_b_ = Param(Matrix(1, kClassCount, 0.0));
}

SliceNet::Pass SliceNet::forward(Tape& tape, std::span<const double> features,
                                 std::span<const double> history, Mode mode,
                                 Rng* rng, DropoutStats* stats) {
  if (features.size() != config_.seq_len) {
    throw nn::ShapeError("SliceNet: expected " +
                         std::to_string(config_.seq_len) + " features, got " +
                         std::to_string(features.size()));
  }
  if (!history.empty() && history.size() != kClassCount) {
    throw nn::ShapeError("SliceNet: history must have 3 entries");
  }
  Var x = tape.scale_rows(tape.parameter(embed_scale_), features);
  x = tape.add(x, tape.parameter(embed_bias_));
  Var encoded = conv_module(tape, encoder_, x, mode, rng, stats);

  Matrix hist(config_.seq_len, kClassCount);
  if (!history.empty()) {
    for (std::size_t r = 0; r < hist.rows; ++r) {
      for (std::size_t c = 0; c < kClassCount; ++c) hist(r, c) = history[c];
    }
  }
  Var out_embed =
      tape.matmul(tape.constant(std::move(hist)), tape.parameter(history_proj_));
  Var mix = tape.concat_cols(encoded, out_embed);

  Var m = conv_step(tape, mixer_, mix);
  Var dec = conv_module(tape, decoder_, m, mode, rng, stats);
  AttentionVars att = attention_module(tape, attention_, encoded, dec);
  Var out = tape.add(dec, att.output);
  Var pooled = tape.mean_rows(out);
  Var logits = tape.add_row(tape.matmul(pooled, tape.parameter(out_w_)),
                            tape.parameter(out_b_));
  return {encoded, mix, logits};
}

Matrix SliceNet::encode_mix_decode(std::span<const double> features,
                                   std::span<const double> history) {
  Tape t;
  return t.value(
      forward(t, features, history, Mode::kInference, nullptr).logits);
}

Matrix SliceNet::mix(std::span<const double> features,
                     std::span<const double> history) {
  Tape t;
  return t.value(forward(t, features, history, Mode::kInference, nullptr).mix);
}

SliceDecision SliceNet::select_slice(const SliceFeatureVector& features,
                                     std::span<const double> history) {
  const auto values = features.values();
  const Matrix logits = encode_mix_decode(values, history);
  for (double v : logits.data) {
    if (!std::isfinite(v)) throw DivergedError("SliceNet: non-finite logits");
  }
  const Matrix p = nn::softmax_rows(logits);
  std::size_t best = 0;
  for (std::size_t j = 1; j < kClassCount; ++j) {
    if (p(0, j) > p(0, best)) best = j;
  }
  SliceDecision d;
  d.slice = service_from_index(best);
  d.indicator = indicator_of(d.slice);
  d.confidence = p(0, best);
  for (std::size_t j = 0; j < kClassCount; ++j) d.probabilities[j] = p(0, j);
  return d;
}

std::vector<std::pair<std::string, Param*>> SliceNet::named_parameters() {
  std::vector<std::pair<std::string, Param*>> out;
  out.emplace_back("embed.scale", &embed_scale_);
  out.emplace_back("embed.bias", &embed_bias_);
  encoder_.collect(out, "encoder");
  out.emplace_back("history.proj", &history_proj_);
  mixer_.collect(out, "mixer");
  decoder_.collect(out, "decoder");
  attention_.collect(out, "attention");
  out.emplace_back("out.w", &out_w_);
  out.emplace_back("out.b", &out_b_);
  return out;
}

std::vector<Param*> SliceNet::parameters() {
  std::vector<Param*> out;
  for (auto& [_, p] : named_parameters()) out.push_back(p);
  return out;
}

std::size_t SliceNet::parameter_count() {
  std::size_t n = 0;
  for (Param* p : parameters()) n += p->value.size();
  return n;
}

void SliceNet::save(std::ostream& os) {
  model_io::Section s;
  s.tag = model_io::kSliceNetTag;
  Matrix cfg(1, 14);
  cfg(0, 0) = static_cast<double>(config_.seq_len);
  cfg(0, 1) = static_cast<double>(config_.width);
  cfg(0, 2) = static_cast<double>(config_.history_width);
  for (std::size_t i = 0; i < 4; ++i) {
    cfg(0, 3 + i) = static_cast<double>(config_.kernels[i]);
    cfg(0, 7 + i) = static_cast<double>(config_.dilations[i]);
  }
  cfg(0, 11) = static_cast<double>(config_.attention_kernel);
  cfg(0, 12) = config_.keep_prob;
  cfg(0, 13) = 0.0;  // reserved
  s.tensors.push_back(std::move(cfg));
  for (auto& [_, p] : named_parameters()) s.tensors.push_back(p->value);
  model_io::write(os, s);
}

SliceNet SliceNet::load(std::istream& is) {
  model_io::Section s = model_io::read(is);
  if (s.tag != model_io::kSliceNetTag) {
    throw model_io::FormatError("not a SliceNet section");
  }
  if (s.tensors.empty() || s.tensors[0].rows != 1 || s.tensors[0].cols != 14) {
    throw model_io::FormatError("SliceNet: missing config tensor");
  }
  const Matrix& cfg = s.tensors[0];
  auto as_size = [](double v) { return static_cast<std::size_t>(v); };
  SliceNetConfig c;
  c.seq_len = as_size(cfg(0, 0));
  c.width = as_size(cfg(0, 1));
  c.history_width = as_size(cfg(0, 2));
  for (std::size_t i = 0; i < 4; ++i) {
    c.kernels[i] = as_size(cfg(0, 3 + i));
    c.dilations[i] = as_size(cfg(0, 7 + i));
  }
  c.attention_kernel = as_size(cfg(0, 11));
  c.keep_prob = cfg(0, 12);
  Rng dummy(0);
  SliceNet net(c, dummy);
  auto params = net.named_parameters();
  if (params.size() + 1 != s.tensors.size()) {
    throw model_io::FormatError("SliceNet: tensor count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param* p = params[i].second;
    if (!p->value.same_shape(s.tensors[i + 1])) {
      throw model_io::FormatError("SliceNet: shape mismatch for " +
                                  params[i].first);
    }
    p->value = std::move(s.tensors[i + 1]);
  }
  return net;
}

// -- training ----------------------------------------------------------------

double accuracy(SliceNet& model, std::span<const LabeledSample> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : data) {
    hits += slice_index(model.select_slice(s.features).slice) == s.label;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train(SliceNet& model, std::span<const LabeledSample> data,
                  const TrainConfig& config, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (!(config.learning_rate >= 0.001 && config.learning_rate <= 0.1)) {
    throw std::invalid_argument("train: learning rate must lie in [0.001, 0.1]");
  }
  if (config.batch_size == 0) throw std::invalid_argument("train: batch 0");
  auto params = model.parameters();
  nn::Adam adam({.learning_rate = config.learning_rate});
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double total = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (Param* p : params) p->zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const LabeledSample& s = data[order[k]];
        const auto values = s.features.values();
        // Half the passes see the label's own indicator as the previous
        // decision, matching repeat requests at run time.
        std::array<double, kClassCount> history{};
        const bool with_history = rng.bernoulli(0.5);
        if (with_history) {
          const Indicator code = indicator_of(service_from_index(s.label));
          for (std::size_t c = 0; c < kClassCount; ++c) history[c] = code[c];
        }
        Tape tape;
        auto pass = model.forward(
            tape, values,
            with_history ? std::span<const double>(history) : std::span<const double>{},
            Mode::kTraining, &rng);
        Var loss = tape.cross_entropy(pass.logits, s.label);
        const double l = tape.value(loss)(0, 0);
        if (!std::isfinite(l)) {
          std::ostringstream msg;
          msg << "train: non-finite loss at epoch " << epoch << ", sample "
              << order[k] << " (label " << s.label << ")";
          throw DivergedError(msg.str());
        }
        total += l;
        tape.backward(loss);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (Param* p : params) {
        for (double& g : p->grad.data) g *= inv;
      }
      adam.step(params);
    }
    result.curve.push_back({epoch, total / static_cast<double>(data.size()),
                            accuracy(model, data)});
  }
  return result;
}

std::vector<LabeledSample> synthetic_dataset(std::size_t n, Rng& rng) {
  std::vector<LabeledSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto service = service_from_index(rng.below(3));
    double capacity = 0.0;
    double mobility = 0.0;
    switch (service) {
      case ServiceType::kEmbb:
        capacity = rng.uniform(0.4, 1.0);
        mobility = rng.uniform(0.0, 0.7);
        break;
      case ServiceType::kUrllc:
        capacity = rng.uniform(0.1, 0.6);
        mobility = rng.uniform(0.0, 1.0);
        break;
      case ServiceType::kMmtc:
        capacity = rng.uniform(0.0, 0.4);
        mobility = rng.uniform(0.0, 0.1);
        break;
    }
    LabeledSample s;
    s.features = SliceFeatureVector::make(service, rng.uniform(0.5, 1.0),
                                          rng.next_u64(), capacity, mobility);
    s.label = slice_index(service);
    out.push_back(s);
  }
  return out;
}

void write_dataset_csv(std::ostream& os, std::span<const LabeledSample> data) {
  os << "st_embb,st_urllc,st_mmtc,f_sla,imsi,s_c,d_m,label\n";
  os.precision(17);
  for (const auto& s : data) {
    for (double v : s.features.values()) os << v << ',';
    os << s.label << '\n';
  }
}

std::vector<LabeledSample> read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) {
    throw std::invalid_argument("dataset: empty file");
  }
  std::vector<LabeledSample> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::invalid_argument("dataset line " + std::to_string(line_no) +
                                    ": bad number '" + cell + "'");
      }
    }
    if (cells.size() != kFeatureCount + 1) {
      throw std::invalid_argument("dataset line " + std::to_string(line_no) +
                                  ": expected 8 columns");
    }
    LabeledSample s;
    s.features.service_one_hot = {cells[0], cells[1], cells[2]};
    s.features.fair_sla = cells[3];
    s.features.imsi = cells[4];
    s.features.slice_capacity = cells[5];
    s.features.mobility = cells[6];
    s.features.validate();
    const double label = cells[7];
    if (label != 0.0 && label != 1.0 && label != 2.0) {
      throw std::invalid_argument("dataset line " + std::to_string(line_no) +
                                  ": label must be 0, 1 or 2");
    }
    s.label = static_cast<std::size_t>(label);
    out.push_back(s);
  }
  return out;
}

void write_loss_csv(std::ostream& os, const TrainResult& result) {
  os << "epoch,loss,accuracy\n";
  os.precision(10);
  for (const auto& e : result.curve) {
    os << e.epoch << ',' << e.loss << ',' << e.accuracy << '\n';
  }
}

}  // namespace ts3ra::slicenet
