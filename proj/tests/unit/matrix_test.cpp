// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/matrix.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "tokpool/error.hpp"

namespace tokpool {
namespace {

TEST(Matrix, ConstructsFilledAndRowMajor) {
  Matrix m(2, 3, 1.5);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  for (double v : m.data()) EXPECT_EQ(v, 1.5);

  const Matrix r = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(r(1, 0), 4.0);
  EXPECT_EQ(r.data()[4], 5.0);
  EXPECT_EQ(r.row(1)[2], 6.0);
}

TEST(Matrix, RejectsMismatchedDataAndRaggedRows) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), DataError);
  EXPECT_THROW(Matrix::from_rows({{1, 2}, {3}}), DataError);
}

TEST(Matrix, SelectSliceTranspose) {
  const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const std::vector<std::size_t> idx{2, 0};
  EXPECT_EQ(m.select_rows(idx), Matrix::from_rows({{5, 6}, {1, 2}}));
  EXPECT_EQ(m.slice_rows(1, 3), Matrix::from_rows({{3, 4}, {5, 6}}));
  EXPECT_EQ(m.slice_cols(1, 2), Matrix::from_rows({{2}, {4}, {6}}));
  EXPECT_EQ(m.transpose(), Matrix::from_rows({{1, 3, 5}, {2, 4, 6}}));
  EXPECT_EQ(Matrix::identity(2), Matrix::from_rows({{1, 0}, {0, 1}}));
}

TEST(Matrix, StackingAndConcatenation) {
  const Matrix a = Matrix::from_rows({{1, 2}});
  const Matrix b = Matrix::from_rows({{3, 4}, {5, 6}});
  EXPECT_EQ(vstack(a, b), Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}}));
  EXPECT_THROW(vstack(a, Matrix(1, 3)), DataError);

  const std::vector<Matrix> parts{Matrix::from_rows({{1}, {2}}), Matrix::from_rows({{3, 4}, {5, 6}})};
  EXPECT_EQ(hconcat(parts), Matrix::from_rows({{1, 3, 4}, {2, 5, 6}}));
  const std::vector<Matrix> bad{Matrix(1, 1), Matrix(2, 1)};
  EXPECT_THROW(hconcat(bad), DataError);
}

TEST(Matrix, FinitenessCheck) {
  Matrix m(2, 2, 0.0);
  EXPECT_TRUE(m.all_finite());
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(m.all_finite());
  m(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(m.all_finite());
}

}  // namespace
}  // namespace tokpool
