#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ts3ra/domain.hpp"
#include "ts3ra/rng.hpp"
#include "ts3ra/tensor.hpp"

namespace ts3ra::slicenet {

using nn::Matrix;
using nn::Param;
using nn::Tape;
using nn::Var;

// one-hot service (3), fair SLA, IMSI hash, slice capacity, mobility
inline constexpr std::size_t kFeatureCount = 7;
inline constexpr std::size_t kClassCount = 3;

struct SliceFeatureVector {
  std::array<double, 3> service_one_hot{};
  double fair_sla = 0.0;
  double imsi = 0.0;
  double slice_capacity = 0.0;
  double mobility = 0.0;

  std::array<double, kFeatureCount> values() const;
  /// All components in [0, 1], one-hot sums to 1.
  void validate() const;

  static SliceFeatureVector make(ServiceType service, double fair_sla,
                                 std::uint64_t imsi_hash,
                                 double slice_capacity_norm,
                                 double mobility_norm);
};

struct SliceDecision {
  Indicator indicator{};
  ServiceType slice = ServiceType::kEmbb;
  double confidence = 0.0;
  std::array<double, kClassCount> probabilities{};
};

enum class Mode { kTraining, kInference };

class DivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ReLU -> depthwise separable conv (same padding) -> layer norm.
struct ConvStepParams {
  std::size_t kernel = 3;
  std::size_t dilation = 1;
  double ln_eps = 1e-5;
  Param depthwise;  // kernel x in
  Param pointwise;  // in x out
  Param ln_gain;    // 1 x out
  Param ln_bias;    // 1 x out

  static ConvStepParams init(std::size_t kernel, std::size_t dilation,
                             std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_width() const { return pointwise.value.rows; }
  std::size_t out_width() const { return pointwise.value.cols; }
  void collect(std::vector<std::pair<std::string, Param*>>& out,
               const std::string& prefix);
};

struct DropoutStats {
  std::uint64_t applications = 0;
  std::uint64_t units = 0;
  std::uint64_t zeroed = 0;
};

/// Four stacked conv steps: h1 = step(x), h2 = x + step(h1),
/// h3 = step(h2), h4 = x + step(h3); dropout on h4 while training.
struct ConvModuleParams {
  std::array<ConvStepParams, 4> steps;
  double keep_prob = 0.5;

  static ConvModuleParams init(std::size_t width,
                               const std::array<std::size_t, 4>& kernels,
                               const std::array<std::size_t, 4>& dilations,
                               Rng& rng);
  void collect(std::vector<std::pair<std::string, Param*>>& out,
               const std::string& prefix);
};

struct AttentionParams {
  ConvStepParams query_in;   // applied to target + timing signal
  ConvStepParams query_out;  // second projection before attending
  Matrix timing;             // max_len x width, sinusoidal

  static AttentionParams init(std::size_t width, std::size_t kernel,
                              std::size_t max_len, Rng& rng);
  void collect(std::vector<std::pair<std::string, Param*>>& out,
               const std::string& prefix);
};

Matrix timing_signal(std::size_t max_len, std::size_t width);

Var conv_step(Tape& tape, ConvStepParams& p, Var x);
Var conv_module(Tape& tape, ConvModuleParams& p, Var x, Mode mode, Rng* rng,
                DropoutStats* stats = nullptr);

struct AttentionVars {
  Var output;   // target_len x width
  Var weights;  // target_len x source_len, rows sum to 1
};

/// Scaled dot-product attention of a projected target over the source
/// positions; keys and values are the source rows.
AttentionVars attention_module(Tape& tape, AttentionParams& p, Var source,
                               Var target);

// Matrix-in, matrix-out wrappers running a throwaway tape.
Matrix conv_step(ConvStepParams& p, const Matrix& x);
Matrix conv_module(ConvModuleParams& p, const Matrix& x, Mode mode, Rng* rng,
                   DropoutStats* stats = nullptr);
std::pair<Matrix, Matrix> attention_module(AttentionParams& p,
                                           const Matrix& source,
                                           const Matrix& target);

struct SliceNetConfig {
  std::size_t seq_len = kFeatureCount;
  std::size_t width = 8;
  std::size_t history_width = 4;
  std::array<std::size_t, 4> kernels{3, 3, 15, 15};
  std::array<std::size_t, 4> dilations{1, 1, 1, 1};
  std::size_t attention_kernel = 5;
  double keep_prob = 0.5;
};

class SliceNet {
 public:
  SliceNet(SliceNetConfig config, Rng& init_rng);

  const SliceNetConfig& config() const { return config_; }

  struct Pass {
    Var encoded;  // seq_len x width
    Var mix;      // seq_len x (width + history_width)
    Var logits;   // 1 x 3
  };

  /// `features` must have seq_len entries; `history` is the previous slice
  /// indicator of the device, or all zeros when there is none.
  Pass forward(Tape& tape, std::span<const double> features,
               std::span<const double> history, Mode mode, Rng* rng,
               DropoutStats* stats = nullptr);

  /// Inference-mode logits (1 x 3).
  Matrix encode_mix_decode(std::span<const double> features,
                           std::span<const double> history = {});
  Matrix mix(std::span<const double> features,
             std::span<const double> history = {});

  SliceDecision select_slice(const SliceFeatureVector& features,
                             std::span<const double> history = {});

  std::vector<std::pair<std::string, Param*>> named_parameters();
  std::vector<Param*> parameters();
  std::size_t parameter_count();

  void save(std::ostream& os);
  static SliceNet load(std::istream& is);

 private:
  SliceNetConfig config_;
  Param embed_scale_;  // seq_len x width
  Param embed_bias_;   // seq_len x width
  ConvModuleParams encoder_;
  Param history_proj_;  // 3 x history_width
  ConvStepParams mixer_;
  ConvModuleParams decoder_;
  AttentionParams attention_;
  Param out_w_;  // width x 3
  Param out_b_;  // 1 x 3
};

struct LabeledSample {
  SliceFeatureVector features;
  std::size_t label = 0;  // slice index
};

struct TrainConfig {
  std::size_t epochs = 10;
  double learning_rate = 0.01;
  std::size_t batch_size = 16;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> curve;
};

/// Mini-batch Adam on categorical cross-entropy. Dropout is active during
/// the update passes; per-epoch accuracy is measured in inference mode.
/// Throws DivergedError on a non-finite loss.
TrainResult train(SliceNet& model, std::span<const LabeledSample> data,
                  const TrainConfig& config, Rng& rng);

double accuracy(SliceNet& model, std::span<const LabeledSample> data);

/// Labelled feature rows whose label is the requested service; the other
/// features are drawn from class-dependent but overlapping ranges.
std::vector<LabeledSample> synthetic_dataset(std::size_t n, Rng& rng);

void write_dataset_csv(std::ostream& os, std::span<const LabeledSample> data);
std::vector<LabeledSample> read_dataset_csv(std::istream& is);
void write_loss_csv(std::ostream& os, const TrainResult& result);

}  // namespace ts3ra::slicenet
