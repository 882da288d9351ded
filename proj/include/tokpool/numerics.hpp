// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tokpool/matrix.hpp"
#include "tokpool/rng.hpp"

namespace tokpool {

/// Row-wise softmax with per-row max subtraction. Throws DataError on
/// non-finite input.
Matrix softmax_rows(const Matrix& m);

/// Entry (i, j) = sum_m (a[i, m] - b[j, m])^2, accumulated in column order.
Matrix pairwise_sq_dists(const Matrix& a, const Matrix& b);

/// Plain product with row-major accumulation: for each (i, j) the inner
/// index runs 0..k-1 in order, so results are bit-reproducible.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Squared euclidean distance between two equal-length vectors.
double sq_dist(std::span<const double> a, std::span<const double> b) noexcept;

/// Draws k distinct indices from [0, n). Each draw picks index i with
/// probability proportional to probs[i] among the indices not drawn yet
/// (Plackett-Luce order); uniform when probs is absent. Returned in draw order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k,
                                                    std::optional<std::span<const double>> probs = {});

/// Caps the worker threads used by pairwise_sq_dists and matmul. 0 or 1 means
/// sequential. Every output entry is computed by exactly one thread with the
/// same summation order, so results do not depend on the cap.
void set_thread_cap(std::size_t threads) noexcept;
std::size_t thread_cap() noexcept;

}  // namespace tokpool
