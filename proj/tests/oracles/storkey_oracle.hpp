#pragma once

// Storkey learning evaluated term by term in long double, straight from the
// definition: for every ordered pair (i, j) with i != j,
//   w'_ij = w_ij + (xi_i xi_j - xi_i h_ji - h_ij xi_j) / N,
//   h_ij  = sum over k not in {i, j} of w_ik xi_k,
// with every local field taken from the matrix before the update.

#include <cstdint>
#include <vector>

namespace oracle {

inline std::vector<std::vector<long double>> storkey_brute(
    const std::vector<std::vector<long double>>& w, const std::vector<int>& xi) {
  const std::size_t n = xi.size();
  auto h = [&](std::size_t i, std::size_t j) {
    long double s = 0.0L;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i || k == j) continue;
      s += w[i][k] * xi[k];
    }
    return s;
  };
  auto out = w;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        out[i][j] = 0.0L;
        continue;
      }
      out[i][j] = w[i][j] + (static_cast<long double>(xi[i] * xi[j]) - xi[i] * h(j, i) -
                             h(i, j) * xi[j]) /
                                static_cast<long double>(n);
    }
  }
  return out;
}

}  // namespace oracle
