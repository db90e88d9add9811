#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ts3ra {

/// Seeded pseudo-random stream. Streams are split by label: a child stream
/// depends only on (parent seed, label), so adding a consumer never shifts
/// the draws seen by another.
///
/// All derived draws use explicit bit manipulation rather than the standard
/// distributions, whose output is implementation-defined, so traces are
/// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  Rng split(std::string_view label) const;
  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double exponential(double mean);
  double normal(double mean = 0.0, double stddev = 1.0);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ts3ra
