// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tokpool/matrix.hpp"
#include "tokpool/scoring.hpp"
#include "tokpool/transformer.hpp"

namespace tokpool {

enum class PoolMethod {
  kKMeans,
  kWeightedKMeans,
  kKMedoids,
  kWeightedKMedoids,
  kRandom,
  kImportance,
  kGrid,
};

enum class ClusterInit {
  kTopKWeight,  // the K highest-weight tokens, ties to the lower index
  kRandom,      // K tokens drawn uniformly without replacement
};

std::string_view to_string(PoolMethod method) noexcept;
PoolMethod parse_pool_method(std::string_view text);
std::string_view to_string(ClusterInit init) noexcept;
ClusterInit parse_cluster_init(std::string_view text);

bool is_weighted(PoolMethod method) noexcept;
bool is_medoid(PoolMethod method) noexcept;

struct PoolSpec {
  PoolMethod method = PoolMethod::kWeightedKMedoids;
  /// Target number of pooled tokens, protected token excluded.
  std::size_t k = 1;
  std::size_t max_iters = 5;
  ClusterInit init = ClusterInit::kTopKWeight;
  std::uint64_t seed = 0;
  /// Row 0 (classification token) bypasses pooling and stays first.
  bool protect_first = true;
  /// Attach per-output carry counts (summed input counts, 1 per token when
  /// the input has none).
  bool emit_counts = false;

  void validate() const;
};

/// Clustering of the non-protected tokens.
///
/// `assignment[i]` is the cluster of input row `first_clustered + i`.
/// `medoid_indices` are row numbers of the input token set.
struct ClusterResult {
  std::size_t first_clustered = 0;
  std::vector<std::size_t> assignment;
  Matrix centers;
  std::optional<std::vector<std::size_t>> medoid_indices;
  std::size_t iterations = 0;
  double loss = 0.0;
  /// Objective after initialisation and after every center update.
  std::vector<double> loss_history;
  /// Summed carry counts per cluster.
  std::vector<double> counts;
};

struct PoolResult {
  TokenSet tokens;
  ClusterResult clusters;
};

/// Asymmetric Chamfer divergence: sum_i w_i * min_j |f_i - fhat_j|^2, with
/// w_i = 1 when weights are absent.
double chamfer_loss(const Matrix& f, const Matrix& fhat,
                    std::optional<std::span<const double>> weights = {});

/// Token Pooling. Returns the input unchanged when k is at least the number
/// of poolable tokens. Otherwise clusters them (K-Means / K-Medoids and the
/// weighted variants) or defers to the baseline selected by spec.method, and
/// emits the protected token followed by the K centers.
PoolResult token_pool(const TokenSet& f, const PoolSpec& spec);

/// Uniformly samples k tokens; survivors keep their original order.
TokenSet random_select(const TokenSet& f, std::size_t k, std::uint64_t seed, bool protect_first);

/// Samples k tokens without replacement with probability proportional to
/// their scores; survivors keep their original order.
TokenSet importance_select(const TokenSet& f, const ScoreVector& scores, std::size_t k,
                           std::uint64_t seed, bool protect_first);

/// 2x2 mean pooling over the token grid. A classification token (grid area
/// N - 1) passes through as row 0.
TokenSet grid_pool(const TokenSet& f);

}  // namespace tokpool
