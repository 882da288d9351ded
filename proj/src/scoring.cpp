// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/scoring.hpp"

#include <cmath>
#include <string>

#include "tokpool/error.hpp"

namespace tokpool {

ScoreVector significance(const AttentionMaps& maps) {
  if (maps.heads.empty()) throw DataError("attention maps have no heads");
  const std::size_t n = maps.tokens();
  constexpr double kRowTolerance = 1e-6;

  ScoreVector scores{std::vector<double>(n, 0.0)};
  for (std::size_t h = 0; h < maps.heads.size(); ++h) {
    const Matrix& a = maps.heads[h];
    if (a.rows() != n || a.cols() != n) {
      throw DataError("attention head " + std::to_string(h) + " is not " + std::to_string(n) +
                      "x" + std::to_string(n));
    }
    for (std::size_t r = 0; r < n; ++r) {
      double row_sum = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        const double v = a(r, c);
        if (!std::isfinite(v) || v < 0.0) {
          throw DataError("attention head " + std::to_string(h) + " row " + std::to_string(r) +
                          " has a negative or non-finite entry");
        }
        row_sum += v;
        scores.values[c] += v;
      }
      if (std::abs(row_sum - 1.0) > kRowTolerance) {
        throw DataError("attention head " + std::to_string(h) + " row " + std::to_string(r) +
                        " sums to " + std::to_string(row_sum) + ", not 1");
      }
    }
  }
  return scores;
}

}  // namespace tokpool
