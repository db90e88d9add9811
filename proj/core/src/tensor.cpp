#include "ts3ra/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ts3ra::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

Var Tape::push(Matrix value, std::function<void(Tape&, std::size_t)> back) {
  Node n;
  n.grad = Matrix(value.rows, value.cols);
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value)); }

Var Tape::parameter(Param& p) {
  Var v = push(p.value);
  nodes_[v.id].param = &p;
  return v;
}

Var Tape::add(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  require(x.same_shape(y), "add: shape mismatch");
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += y.data[i];
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) {
      t.grad(a.id).data[i] += g.data[i];
      t.grad(b.id).data[i] += g.data[i];
    }
  });
}

Var Tape::add_row(Var x, Var row) {
  const Matrix& m = value(x);
  const Matrix& r = value(row);
  require(r.rows == 1 && r.cols == m.cols, "add_row: shape mismatch");
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) out(i, j) += r(0, j);
  }
  return push(std::move(out), [x, row](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(x.id);
    Matrix& gr = t.grad(row.id);
    for (std::size_t i = 0; i < g.rows; ++i) {
      for (std::size_t j = 0; j < g.cols; ++j) {
        gx(i, j) += g(i, j);
        gr(0, j) += g(i, j);
      }
    }
  });
}

Var Tape::relu(Var a) {
  Matrix out = value(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(a);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x.data[i] > 0.0) ga.data[i] += g.data[i];
    }
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = value(a);
  for (double& v : out.data) v *= s;
  return push(std::move(out), [a, s](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += s * g.data[i];
  });
}

Var Tape::mask(Var a, const std::vector<std::uint8_t>& keep,
               double keep_prob) {
  const Matrix& x = value(a);
  require(keep.size() == x.size(), "mask: size mismatch");
  Matrix out = x;
  const double s = 1.0 / keep_prob;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = keep[i] ? out.data[i] * s : 0.0;
  }
  return push(std::move(out), [a, keep, s](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (keep[i]) ga.data[i] += s * g.data[i];
    }
  });
}

Var Tape::scale_rows(Var x, std::span<const double> factors) {
  const Matrix& m = value(x);
  require(factors.size() == m.rows, "scale_rows: size mismatch");
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) out(i, j) *= factors[i];
  }
  std::vector<double> f(factors.begin(), factors.end());
  return push(std::move(out), [x, f = std::move(f)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(x.id);
    for (std::size_t i = 0; i < g.rows; ++i) {
      for (std::size_t j = 0; j < g.cols; ++j) gx(i, j) += f[i] * g(i, j);
    }
  });
}

Var Tape::depthwise_conv(Var x, Var kernel, std::size_t dilation) {
  const Matrix& in = value(x);
  const Matrix& k = value(kernel);
  require(k.cols == in.cols, "depthwise_conv: channel mismatch");
  require(k.rows % 2 == 1, "depthwise_conv: kernel length must be odd");
  require(dilation >= 1, "depthwise_conv: dilation must be >= 1");
  const auto len = static_cast<std::ptrdiff_t>(in.rows);
  const auto half = static_cast<std::ptrdiff_t>(k.rows / 2);
  const auto dil = static_cast<std::ptrdiff_t>(dilation);
  Matrix out(in.rows, in.cols);
  for (std::ptrdiff_t pos = 0; pos < len; ++pos) {
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(k.rows); ++j) {
      const std::ptrdiff_t src = pos + (j - half) * dil;
      if (src < 0 || src >= len) continue;
      for (std::size_t c = 0; c < in.cols; ++c) {
        out(pos, c) += k(j, c) * in(src, c);
      }
    }
  }
  return push(std::move(out), [x, kernel, half, dil, len](Tape& t,
                                                         std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& in = t.value(x);
    const Matrix& k = t.value(kernel);
    Matrix& gx = t.grad(x.id);
    Matrix& gk = t.grad(kernel.id);
    for (std::ptrdiff_t pos = 0; pos < len; ++pos) {
      for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(k.rows); ++j) {
        const std::ptrdiff_t src = pos + (j - half) * dil;
        if (src < 0 || src >= len) continue;
        for (std::size_t c = 0; c < in.cols; ++c) {
          gx(src, c) += k(j, c) * g(pos, c);
          gk(j, c) += in(src, c) * g(pos, c);
        }
      }
    }
  });
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  require(x.cols == y.rows, "matmul: inner dimension mismatch");
  Matrix out(x.rows, y.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xv = x(i, k);
      if (xv == 0.0) continue;
      for (std::size_t j = 0; j < y.cols; ++j) out(i, j) += xv * y(k, j);
    }
  }
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(a);
    const Matrix& y = t.value(b);
    Matrix& gx = t.grad(a.id);
    Matrix& gy = t.grad(b.id);
    for (std::size_t i = 0; i < x.rows; ++i) {
      for (std::size_t k = 0; k < x.cols; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < y.cols; ++j) {
          acc += g(i, j) * y(k, j);
          gy(k, j) += x(i, k) * g(i, j);
        }
        gx(i, k) += acc;
      }
    }
  });
}

Var Tape::matmul_bt(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  require(x.cols == y.cols, "matmul_bt: inner dimension mismatch");
  Matrix out(x.rows, y.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < y.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) acc += x(i, k) * y(j, k);
      out(i, j) = acc;
    }
  }
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(a);
    const Matrix& y = t.value(b);
    Matrix& gx = t.grad(a.id);
    Matrix& gy = t.grad(b.id);
    for (std::size_t i = 0; i < x.rows; ++i) {
      for (std::size_t j = 0; j < y.rows; ++j) {
        const double gij = g(i, j);
        for (std::size_t k = 0; k < x.cols; ++k) {
          gx(i, k) += gij * y(j, k);
          gy(j, k) += gij * x(i, k);
        }
      }
    }
  });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& in = value(x);
  const Matrix& ga = value(gain);
  const Matrix& be = value(bias);
  require(ga.rows == 1 && ga.cols == in.cols && be.same_shape(ga),
          "layer_norm: gain/bias shape mismatch");
  const std::size_t n = in.cols;
  Matrix xhat(in.rows, n);
  std::vector<double> inv_std(in.rows);
  Matrix out(in.rows, n);
  for (std::size_t i = 0; i < in.rows; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += in(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = in(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat(i, j) = (in(i, j) - mean) * inv_std[i];
      out(i, j) = ga(0, j) * xhat(i, j) + be(0, j);
    }
  }
  return push(std::move(out), [x, gain, bias, xhat = std::move(xhat),
                               inv_std = std::move(inv_std)](Tape& t,
                                                             std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& ga = t.value(gain);
    Matrix& gx = t.grad(x.id);
    Matrix& gg = t.grad(gain.id);
    Matrix& gb = t.grad(bias.id);
    const std::size_t n = g.cols;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < g.rows; ++i) {
      double sum_d = 0.0;
      double sum_dx = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = g(i, j) * ga(0, j);
        sum_d += d;
        sum_dx += d * xhat(i, j);
        gg(0, j) += g(i, j) * xhat(i, j);
        gb(0, j) += g(i, j);
      }
      for (std::size_t j = 0; j < n; ++j) {
        const double d = g(i, j) * ga(0, j);
        gx(i, j) += inv_std[i] * (d - inv_n * sum_d - xhat(i, j) * inv_n * sum_dx);
      }
    }
  });
}

Matrix softmax_rows(const Matrix& a) {
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < a.cols; ++j) mx = std::max(mx, a(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      out(i, j) = std::exp(a(i, j) - mx);
      sum += out(i, j);
    }
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) /= sum;
  }
  return out;
}

Var Tape::softmax_rows(Var a) {
  Matrix out = nn::softmax_rows(value(a));
  return push(std::move(out), [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(Var{self});
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols; ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < g.cols; ++j) {
        ga(i, j) += y(i, j) * (g(i, j) - dot);
      }
    }
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  require(x.rows == y.rows, "concat_cols: row mismatch");
  Matrix out(x.rows, x.cols + y.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = x(i, j);
    for (std::size_t j = 0; j < y.cols; ++j) out(i, x.cols + j) = y(i, j);
  }
  return push(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(a.id);
    Matrix& gy = t.grad(b.id);
    for (std::size_t i = 0; i < g.rows; ++i) {
      for (std::size_t j = 0; j < gx.cols; ++j) gx(i, j) += g(i, j);
      for (std::size_t j = 0; j < gy.cols; ++j) gy(i, j) += g(i, gx.cols + j);
    }
  });
}

Var Tape::mean_rows(Var a) {
  const Matrix& x = value(a);
  require(x.rows > 0, "mean_rows: empty input");
  Matrix out(1, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) out(0, j) += x(i, j);
  }
  const double inv = 1.0 / static_cast<double>(x.rows);
  for (double& v : out.data) v *= inv;
  return push(std::move(out), [a, inv](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < ga.rows; ++i) {
      for (std::size_t j = 0; j < ga.cols; ++j) ga(i, j) += inv * g(0, j);
    }
  });
}

Var Tape::cross_entropy(Var logits, std::size_t label) {
  const Matrix& z = value(logits);
  require(z.rows == 1 && label < z.cols, "cross_entropy: bad logits/label");
  Matrix p = nn::softmax_rows(z);
  Matrix out(1, 1);
  out(0, 0) = -std::log(std::max(p(0, label), 1e-300));
  return push(std::move(out), [logits, label, p = std::move(p)](
                                  Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    Matrix& gz = t.grad(logits.id);
    for (std::size_t j = 0; j < p.cols; ++j) {
      gz(0, j) += g * (p(0, j) - (j == label ? 1.0 : 0.0));
    }
  });
}

void Tape::backward(Var loss) {
  require(value(loss).size() == 1, "backward: loss must be scalar");
  for (auto& n : nodes_) n.grad.fill(0.0);
  nodes_[loss.id].grad.data[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back) n.back(*this, i);
    if (n.param != nullptr) {
      for (std::size_t k = 0; k < n.grad.size(); ++k) {
        n.param->grad.data[k] += n.grad.data[k];
      }
    }
  }
}

void Adam::step(std::span<Param* const> params) {
  ++t_;
  const double b1t = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double b2t = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad.data[i];
      p->m.data[i] = config_.beta1 * p->m.data[i] + (1.0 - config_.beta1) * g;
      p->v.data[i] =
          config_.beta2 * p->v.data[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = p->m.data[i] / b1t;
      const double vhat = p->v.data[i] / b2t;
      p->value.data[i] -=
          config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace ts3ra::nn
