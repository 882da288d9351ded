// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/filterlab.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "tokpool/error.hpp"

namespace tokpool {
namespace {

// Gaussian-weighted average of the values evaluated directly in extended
// precision, without any max shifting.
Matrix gaussian_oracle(const FilterProbe& p) {
  Matrix out(p.queries.rows(), p.values.cols());
  for (std::size_t q = 0; q < p.queries.rows(); ++q) {
    long double z = 0.0L;
    std::vector<long double> acc(p.values.cols(), 0.0L);
    for (std::size_t i = 0; i < p.keys.rows(); ++i) {
      long double d2 = 0.0L;
      for (std::size_t c = 0; c < p.keys.cols(); ++c) {
        const long double diff = p.queries(q, c) - p.keys(i, c);
        d2 += diff * diff;
      }
      const long double g = std::exp(-0.5L * p.alpha * d2);
      z += g;
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += g * p.values(i, c);
    }
    for (std::size_t c = 0; c < acc.size(); ++c) out(q, c) = static_cast<double>(acc[c] / z);
  }
  return out;
}

TEST(FilterLab, RandomProbeHasUnitRows) {
  const FilterProbe p = random_probe(9, 5, 2.0, 1);
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.queries.rows(), 9u);
  EXPECT_EQ(p.values.cols(), 5u);
  const FilterProbe r = random_probe(9, 5, 2.0, 1, KeyNorms::kRandom);
  EXPECT_EQ(r.queries, p.queries);
  EXPECT_THROW(r.validate(), DataError);
  for (std::size_t i = 0; i < 9; ++i) {
    double n2 = 0.0;
    for (double v : r.keys.row(i)) n2 += v * v;
    EXPECT_GE(std::sqrt(n2), 0.5 - 1e-12);
    EXPECT_LE(std::sqrt(n2), 2.0 + 1e-12);
  }
}

TEST(FilterLab, BothFormsMatchGaussianOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FilterProbe p = random_probe(12, 6, 0.5 + seed, seed);
    const Matrix oracle = gaussian_oracle(p);
    EXPECT_LT(testing::max_abs_diff(attention_form(p), oracle), 1e-12);
    EXPECT_LT(testing::max_abs_diff(filter_form(p), oracle), 1e-12);
  }
}

TEST(FilterLab, SingleKeyReturnsItsValue) {
  FilterProbe p;
  p.queries = Matrix::from_rows({{1.0, 0.0}});
  p.keys = Matrix::from_rows({{0.0, 1.0}});
  p.values = Matrix::from_rows({{3.0, -2.0}});
  p.alpha = 5.0;
  EXPECT_EQ(attention_form(p), p.values);
  EXPECT_EQ(filter_form(p), p.values);
}

TEST(FilterLab, EquivalenceHoldsOnlyForUnitNorms) {
  const auto unit = verify_equivalence(16, 8, 3.0, 7, 1e-9);
  EXPECT_TRUE(unit.pass);
  EXPECT_LT(unit.max_abs_dev, 1e-9);
  const auto off = verify_equivalence(16, 8, 3.0, 7, 1e-9, KeyNorms::kRandom);
  EXPECT_FALSE(off.pass);
  EXPECT_GT(off.max_abs_dev, 1e-3);
}

TEST(FilterLab, Errors) {
  EXPECT_THROW(verify_equivalence(4, 4, 1.0, 0, 0.0), UsageError);
  EXPECT_THROW(verify_equivalence(4, 4, -1.0, 0, 1e-9), UsageError);
  EXPECT_THROW(random_probe(0, 4, 1.0, 0), UsageError);
  FilterProbe p = random_probe(4, 3, 1.0, 0);
  p.values = Matrix(3, 3);
  EXPECT_THROW(attention_form(p), DataError);
}

}  // namespace
}  // namespace tokpool
