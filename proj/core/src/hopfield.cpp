#include "ts3ra/hopfield.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "ts3ra/model_io.hpp"

namespace ts3ra::hopfield {

void WeightMatrix::validate() const {
  if (we.size() != n * n) throw InvariantError("WeightMatrix: size != N*N");
  for (std::size_t i = 0; i < n; ++i) {
    if ((*this)(i, i) != 0.0) {
      throw InvariantError("WeightMatrix: non-zero diagonal");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite((*this)(i, j))) {
        throw InvariantError("WeightMatrix: non-finite entry");
      }
      if ((*this)(i, j) != (*this)(j, i)) {
        throw InvariantError("WeightMatrix: not symmetric");
      }
    }
  }
}

void validate_pattern(const StatePattern& st) {
  for (auto v : st) {
    if (v != 1 && v != -1) throw InvariantError("pattern entry must be +1 or -1");
  }
}

double weighted_sum(const WeightMatrix& we, const StatePattern& st,
                    std::size_t i) {
  if (i >= we.n) throw std::out_of_range("weighted_sum: node index");
  if (st.size() != we.n) throw InvariantError("weighted_sum: size mismatch");
  double u = 0.0;
  for (std::size_t j = 0; j < we.n; ++j) u += we(i, j) * st[j];
  return u;
}

double local_field(const WeightMatrix& we, const StatePattern& xi,
                   std::size_t i, std::size_t j) {
  if (i == j) throw InvariantError("local_field: i == j");
  if (i >= we.n || j >= we.n) throw std::out_of_range("local_field: index");
  double h = 0.0;
  for (std::size_t k = 0; k < we.n; ++k) {
    if (k != i && k != j) h += we(i, k) * xi[k];
  }
  return h;
}

WeightMatrix storkey_update(const WeightMatrix& prev, const StatePattern& xi) {
  validate_pattern(xi);
  const std::size_t n = prev.n;
  if (xi.size() != n) throw InvariantError("storkey_update: size mismatch");
  WeightMatrix next = prev;
  const double inv_n = 1.0 / static_cast<double>(n);
  // Computing the upper triangle and mirroring keeps symmetry exact.
  for (std::size_t i = 0; i < n; ++i) {
    next(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double hij = local_field(prev, xi, i, j);
      const double hji = local_field(prev, xi, j, i);
      const double delta = inv_n * (static_cast<double>(xi[i] * xi[j]) -
                                    xi[i] * hji - hij * xi[j]);
      next(i, j) = prev(i, j) + delta;
      next(j, i) = next(i, j);
    }
  }
  return next;
}

StatePattern update_state(const WeightMatrix& we, const ThresholdVector& th,
                          const StatePattern& st) {
  if (th.thetas.size() != we.n || st.size() != we.n) {
    throw InvariantError("update_state: dimension mismatch");
  }
  StatePattern out(we.n);
  for (std::size_t i = 0; i < we.n; ++i) {
    out[i] = weighted_sum(we, st, i) - th.thetas[i] >= 0.0 ? 1 : -1;
  }
  return out;
}

RecallResult recall(const WeightMatrix& we, const ThresholdVector& th,
                    const StatePattern& probe, std::size_t max_iters) {
  if (max_iters == 0) throw InvariantError("recall: max_iters must be >= 1");
  validate_pattern(probe);
  RecallResult r;
  StatePattern before = probe;
  StatePattern current = probe;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    StatePattern next = update_state(we, th, current);
    r.iterations = it;
    if (next == current) {
      r.state = std::move(next);
      r.status = RecallStatus::kFixedPoint;
      return r;
    }
    if (it > 1 && next == before) {
      r.state = std::move(next);
      r.status = RecallStatus::kTwoCycle;
      return r;
    }
    before = std::move(current);
    current = std::move(next);
  }
  r.state = std::move(current);
  r.status = RecallStatus::kMaxIters;
  return r;
}

StatePattern encode_pattern(const Indicator& indicator) {
  StatePattern st;
  st.reserve(kEncodedSize);
  for (auto bit : indicator) {
    if (bit > 1) throw InvariantError("encode_pattern: indicator bit must be 0/1");
    st.insert(st.end(), kRepetition, bit ? 1 : -1);
  }
  return st;
}

Indicator decode_pattern(const StatePattern& st) {
  if (st.size() != kEncodedSize) throw InvariantError("decode_pattern: size");
  Indicator out{};
  for (std::size_t b = 0; b < 3; ++b) {
    int sum = 0;
    for (std::size_t k = 0; k < kRepetition; ++k) sum += st[b * kRepetition + k];
    out[b] = sum >= 0 ? 1 : 0;
  }
  return out;
}

std::size_t hamming(const StatePattern& a, const StatePattern& b) {
  if (a.size() != b.size()) throw InvariantError("hamming: size mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

HopfieldNet::HopfieldNet(WeightMatrix we, std::vector<StatePattern> patterns)
    : we_(std::move(we)),
      th_(ThresholdVector::zeros(we_.n)),
      patterns_(std::move(patterns)) {
  we_.validate();
  for (const auto& p : patterns_) {
    validate_pattern(p);
    if (p.size() != we_.n) throw InvariantError("HopfieldNet: pattern size");
  }
}

HopfieldNet HopfieldNet::trained() {
  std::vector<StatePattern> patterns;
  WeightMatrix we = WeightMatrix::zeros(kEncodedSize);
  for (ServiceType s : kAllServiceTypes) {
    patterns.push_back(encode_pattern(indicator_of(s)));
    we = storkey_update(we, patterns.back());
  }
  return HopfieldNet(std::move(we), std::move(patterns));
}

void HopfieldNet::set_load_threshold(double kappa, double load) {
  const double theta = kappa * load;
  if (!std::isfinite(theta)) throw InvariantError("threshold must be finite");
  th_ = ThresholdVector::uniform(we_.n, theta);
}

Classification HopfieldNet::classify(const Indicator& indicator,
                                     std::size_t max_iters) const {
  Classification c;
  c.recall = recall(we_, th_, encode_pattern(indicator), max_iters);
  std::size_t best = 0;
  std::size_t best_d = hamming(c.recall.state, patterns_[0]);
  for (std::size_t k = 1; k < patterns_.size(); ++k) {
    const std::size_t d = hamming(c.recall.state, patterns_[k]);
    if (d < best_d) {
      best = k;
      best_d = d;
    }
  }
  c.snapped = best_d != 0;
  c.slice = service_from_index(best);
  return c;
}

void HopfieldNet::save(std::ostream& os) const {
  model_io::Section s;
  s.tag = model_io::kHopfieldTag;
  nn::Matrix w(we_.n, we_.n);
  w.data = we_.we;
  nn::Matrix th(1, we_.n);
  th.data = th_.thetas;
  nn::Matrix pats(patterns_.size(), we_.n);
  for (std::size_t k = 0; k < patterns_.size(); ++k) {
    for (std::size_t i = 0; i < we_.n; ++i) pats(k, i) = patterns_[k][i];
  }
  s.tensors = {std::move(w), std::move(th), std::move(pats)};
  model_io::write(os, s);
}

HopfieldNet HopfieldNet::load(std::istream& is) {
  model_io::Section s = model_io::read(is);
  if (s.tag != model_io::kHopfieldTag || s.tensors.size() != 3) {
    throw model_io::FormatError("not a Hopfield section");
  }
  const auto& w = s.tensors[0];
  const auto& th = s.tensors[1];
  const auto& pats = s.tensors[2];
  if (w.rows != w.cols || th.rows != 1 || th.cols != w.rows ||
      pats.cols != w.rows || pats.rows != 3) {
    throw model_io::FormatError("Hopfield: inconsistent shapes");
  }
  std::vector<StatePattern> patterns(pats.rows, StatePattern(pats.cols));
  for (std::size_t k = 0; k < pats.rows; ++k) {
    for (std::size_t i = 0; i < pats.cols; ++i) {
      patterns[k][i] = static_cast<std::int8_t>(pats(k, i));
    }
  }
  HopfieldNet net(WeightMatrix{w.rows, w.data}, std::move(patterns));
  net.th_.thetas = th.data;
  return net;
}

void AllocationRequest::validate() const {
  for (auto b : slice_indicator) {
    if (b > 1) throw InvariantError("AllocationRequest: indicator bits must be 0/1");
  }
  if (!(fair_sla >= 0.0 && fair_sla <= 1.0)) {
    throw InvariantError("AllocationRequest: fair_sla outside [0, 1]");
  }
  if (!(slice_value >= 0.0 && slice_value <= 1.0)) {
    throw InvariantError("AllocationRequest: slice_value outside [0, 1]");
  }
  if (!(slice_capacity_bps > 0.0)) {
    throw InvariantError("AllocationRequest: slice_capacity must be > 0");
  }
  if (throughput_bps < 0.0 || arrival_rate < 0.0 || !(demand_factor > 0.0)) {
    throw InvariantError("AllocationRequest: negative rate or demand");
  }
}

namespace {
double unit_factor(double x) { return 0.5 + std::clamp(x, 0.0, 1.0); }
}  // namespace

double bundle_scale(const AllocationRequest& r, const ScalingConfig& cfg) {
  const double f_sinr = unit_factor((r.sinr_db - cfg.sinr_low_db) /
                                    (cfg.sinr_high_db - cfg.sinr_low_db));
  const double f_tp = unit_factor(r.throughput_bps / r.slice_capacity_bps);
  const double f_ar = unit_factor(r.arrival_rate / cfg.arrival_reference);
  const double f_sv = unit_factor(r.slice_value);
  const double geo = std::pow(f_sinr * f_tp * f_ar * f_sv, 0.25);
  return geo * (0.5 + 0.5 * r.fair_sla) * r.demand_factor;
}

ResourceAllocation allocate_resources(const HopfieldNet& net,
                                      const AllocationRequest& request,
                                      ResourcePool& pool,
                                      const BundleTable& table,
                                      const ScalingConfig& scaling) {
  request.validate();
  ResourceAllocation a;
  a.classification = net.classify(request.slice_indicator);
  a.slice = a.classification.slice;
  if (pool.exhausted()) return a;
  const double k = bundle_scale(request, scaling);
  const ResourceBundle& base = table.base[slice_index(a.slice)];
  a.granted.communication_bps =
      std::min(base.communication_bps * k, pool.communication_bps);
  a.granted.computation = std::min(base.computation * k, pool.computation);
  a.granted.caching = std::min(base.caching * k, pool.caching);
  pool.communication_bps -= a.granted.communication_bps;
  pool.computation -= a.granted.computation;
  pool.caching -= a.granted.caching;
  a.accepted = true;
  return a;
}

}  // namespace ts3ra::hopfield
