#pragma once

#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <stdexcept>
#include <span>
#include <vector>

namespace ts3ra::nn {

/// Dense row-major matrix. Rows index sequence positions, columns channels.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Trainable tensor with gradient and Adam moment buffers.
struct Param {
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;

  Param() = default;
  explicit Param(Matrix init)
      : value(std::move(init)),
        grad(value.rows, value.cols),
        m(value.rows, value.cols),
        v(value.rows, value.cols) {}
  void zero_grad() { grad.fill(0.0); }
};

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Records operations for one forward pass; `backward` accumulates
/// gradients into the Params used as leaves.
class Tape {
 public:
  Var constant(Matrix value);
  Var parameter(Param& p);

  Var add(Var a, Var b);
  Var add_row(Var x, Var row);  // x (L x C) + row (1 x C), broadcast
  Var relu(Var a);
  Var scale(Var a, double s);
  Var mask(Var a, const std::vector<std::uint8_t>& keep, double keep_prob);
  Var scale_rows(Var x, std::span<const double> factors);
  /// Depthwise convolution, odd kernel, zero "same" padding.
  Var depthwise_conv(Var x, Var kernel, std::size_t dilation);
  Var matmul(Var a, Var b);     // a (L x M) * b (M x N)
  Var matmul_bt(Var a, Var b);  // a (L x M) * b^T, b (K x M)
  Var layer_norm(Var x, Var gain, Var bias, double eps);
  Var softmax_rows(Var a);
  Var concat_cols(Var a, Var b);
  Var mean_rows(Var a);
  Var cross_entropy(Var logits, std::size_t label);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Param* param = nullptr;
    std::function<void(Tape&, std::size_t)> back;
  };

  Var push(Matrix value, std::function<void(Tape&, std::size_t)> back = {});
  Matrix& grad(std::size_t id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
};

Matrix softmax_rows(const Matrix& a);

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}
  void step(std::span<Param* const> params);
  std::uint64_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
};

}  // namespace ts3ra::nn
