// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "tokpool/error.hpp"

namespace tokpool {
namespace {

std::atomic<std::size_t> g_thread_cap{1};

// Splits [0, rows) into contiguous chunks, one per worker. `fn(begin, end)`
// must write only to rows in its own range.
template <typename Fn>
void for_row_chunks(std::size_t rows, std::size_t work_per_row, Fn&& fn) {
  const std::size_t cap = g_thread_cap.load(std::memory_order_relaxed);
  constexpr std::size_t kMinParallelWork = std::size_t{1} << 16;
  if (cap <= 1 || rows < 2 || rows * work_per_row < kMinParallelWork) {
    fn(std::size_t{0}, rows);
    return;
  }
  const std::size_t workers = std::min(cap, rows);
  const std::size_t chunk = (rows + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t begin = 0; begin < rows; begin += chunk) {
    pool.emplace_back(fn, begin, std::min(rows, begin + chunk));
  }
  for (auto& t : pool) t.join();
}

}  // namespace

void set_thread_cap(std::size_t threads) noexcept {
  g_thread_cap.store(threads == 0 ? 1 : threads, std::memory_order_relaxed);
}

std::size_t thread_cap() noexcept { return g_thread_cap.load(std::memory_order_relaxed); }

Matrix softmax_rows(const Matrix& m) {
  if (!m.all_finite()) throw DataError("softmax_rows: non-finite input");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto in = m.row(r);
    auto dst = out.row(r);
    double max = -std::numeric_limits<double>::infinity();
    for (double v : in) max = std::max(max, v);
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] - max);
      sum += dst[c];
    }
    for (double& v : dst) v /= sum;
  }
  return out;
}

double sq_dist(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    const double d = a[m] - b[m];
    acc += d * d;
  }
  return acc;
}

Matrix pairwise_sq_dists(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DataError("pairwise_sq_dists: feature dimensions differ (" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.cols()) + ")");
  }
  Matrix out(a.rows(), b.rows());
  for_row_chunks(a.rows(), b.rows() * a.cols(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = sq_dist(a.row(i), b.row(j));
    }
  });
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DataError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()) + ")");
  }
  Matrix out(a.rows(), b.cols());
  for_row_chunks(a.rows(), a.cols() * b.cols(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto dst = out.row(i);
      for (std::size_t k = 0; k < a.cols(); ++k) {
        const double aik = a(i, k);
        const auto brow = b.row(k);
        for (std::size_t j = 0; j < brow.size(); ++j) dst[j] += aik * brow[j];
      }
    }
  });
  return out;
}

std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k,
                                                    std::optional<std::span<const double>> probs) {
  if (k > n) {
    throw UsageError("cannot draw " + std::to_string(k) + " distinct indices from " +
                     std::to_string(n));
  }
  std::vector<double> mass(n, 1.0);
  if (probs) {
    if (probs->size() != n) throw UsageError("probability vector length does not match n");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = (*probs)[i];
      if (!std::isfinite(p) || p < 0.0) {
        throw DataError("probability " + std::to_string(i) + " is negative or non-finite");
      }
      mass[i] = p;
      total += p;
    }
    if (n > 0 && !(total > 0.0)) throw DataError("probabilities sum to zero");
  }

  std::vector<bool> taken(n, false);
  std::vector<std::size_t> picked;
  picked.reserve(k);
  for (std::size_t draw = 0; draw < k; ++draw) {
    double remaining = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) remaining += mass[i];
    }
    const double u = rng.uniform();
    std::size_t choice = n;
    if (remaining > 0.0) {
      const double target = u * remaining;
      double cumulative = 0.0;
      std::size_t last_positive = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i] || mass[i] <= 0.0) continue;
        last_positive = i;
        cumulative += mass[i];
        if (cumulative > target) {
          choice = i;
          break;
        }
      }
      if (choice == n) choice = last_positive;  // rounding at the top end
    } else {
      // Positive mass exhausted: remaining zero-probability indices are
      // drawn uniformly.
      std::size_t free_count = 0;
      for (std::size_t i = 0; i < n; ++i) free_count += taken[i] ? 0 : 1;
      std::size_t target = static_cast<std::size_t>(u * static_cast<double>(free_count));
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (target == 0) {
          choice = i;
          break;
        }
        --target;
      }
    }
    taken[choice] = true;
    picked.push_back(choice);
  }
  return picked;
}

}  // namespace tokpool
