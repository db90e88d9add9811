#pragma once

// Renyi entropy in 50-digit binary floating point.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <vector>

namespace oracle {

using Big = boost::multiprecision::cpp_bin_float_50;

inline double renyi_big(const std::vector<double>& p, double alpha) {
  Big sum = 0;
  for (double x : p) {
    if (x > 0) sum += boost::multiprecision::pow(Big(x), Big(alpha));
  }
  const Big h = boost::multiprecision::log(sum) / boost::multiprecision::log(Big(2)) /
                (Big(1) - Big(alpha));
  return static_cast<double>(h);
}

}  // namespace oracle
