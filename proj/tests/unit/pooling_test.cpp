// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/pooling.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "test_support.hpp"
#include "tokpool/error.hpp"

namespace tokpool {
namespace {

using testing::random_matrix;
using testing::random_positive;

PoolSpec spec_for(PoolMethod method, std::size_t k, bool protect_first = false) {
  PoolSpec s;
  s.method = method;
  s.k = k;
  s.protect_first = protect_first;
  return s;
}

TokenSet line(std::initializer_list<double> xs) {
  std::vector<double> v(xs);
  return TokenSet{Matrix(v.size(), 1, v)};
}

// Minimum over all partitions into k nonempty clusters of the summed
// squared distance to each cluster mean.
double best_partition_loss(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  std::vector<std::size_t> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<std::size_t> size(k, 0);
    for (auto l : label) ++size[l];
    if (std::all_of(size.begin(), size.end(), [](std::size_t s) { return s > 0; })) {
      double loss = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> mean(x.cols(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
          if (label[i] == c)
            for (std::size_t m = 0; m < x.cols(); ++m) mean[m] += x(i, m) / size[c];
        for (std::size_t i = 0; i < n; ++i)
          if (label[i] == c)
            for (std::size_t m = 0; m < x.cols(); ++m) loss += (x(i, m) - mean[m]) * (x(i, m) - mean[m]);
      }
      best = std::min(best, loss);
    }
    std::size_t pos = 0;
    while (pos < n && ++label[pos] == k) label[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

TEST(ChamferLoss, HandExample) {
  const Matrix f = Matrix::from_rows({{0, 0}, {1, 0}, {4, 0}});
  const Matrix fhat = Matrix::from_rows({{0, 0}, {3, 0}});
  EXPECT_DOUBLE_EQ(chamfer_loss(f, fhat), 0.0 + 1.0 + 1.0);
  const std::vector<double> w{1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(chamfer_loss(f, fhat, std::span<const double>(w)), 2.0 + 3.0);
  EXPECT_DOUBLE_EQ(chamfer_loss(f, f), 0.0);
  EXPECT_THROW(chamfer_loss(f, Matrix(1, 3)), DataError);
  EXPECT_THROW(chamfer_loss(f, Matrix(0, 2)), DataError);
}

TEST(TokenPool, WorkedOneDimensionalExample) {
  const TokenSet f = line({0.0, 0.1, 10.0, 10.1});
  const PoolResult km = token_pool(f, spec_for(PoolMethod::kKMeans, 2));
  ASSERT_EQ(km.tokens.size(), 2u);
  std::vector<double> centers{km.tokens.features(0, 0), km.tokens.features(1, 0)};
  std::sort(centers.begin(), centers.end());
  EXPECT_NEAR(centers[0], 0.05, 1e-12);
  EXPECT_NEAR(centers[1], 10.05, 1e-12);
  EXPECT_NEAR(km.clusters.loss, 0.01, 1e-12);

  const PoolResult kd = token_pool(f, spec_for(PoolMethod::kKMedoids, 2));
  ASSERT_TRUE(kd.clusters.medoid_indices.has_value());
  std::vector<std::size_t> medoids = *kd.clusters.medoid_indices;
  std::sort(medoids.begin(), medoids.end());
  // Both members of a pair cost the same; the lower index wins.
  EXPECT_EQ(medoids, (std::vector<std::size_t>{0, 2}));
  EXPECT_NEAR(kd.clusters.loss, 0.02, 1e-12);
}

TEST(TokenPool, GuardReturnsInputWhenKCoversTokens) {
  TokenSet f{random_matrix(10, 3, 1)};
  const PoolResult r = token_pool(f, spec_for(PoolMethod::kKMeans, 999, true));
  EXPECT_EQ(r.tokens.features, f.features);
  EXPECT_EQ(r.clusters.iterations, 0u);
  EXPECT_EQ(r.clusters.loss, 0.0);
  // With the first row protected, k = N - 1 already covers the poolable rows.
  EXPECT_EQ(token_pool(f, spec_for(PoolMethod::kKMeans, 9, true)).tokens.features, f.features);
  EXPECT_EQ(token_pool(f, spec_for(PoolMethod::kKMeans, 9, false)).tokens.size(), 9u);
}

TEST(TokenPool, ProtectedFirstRowSurvivesUnchanged) {
  TokenSet f{random_matrix(12, 4, 2)};
  f.weights = random_positive(12, 3);
  for (auto method : {PoolMethod::kKMeans, PoolMethod::kWeightedKMeans, PoolMethod::kKMedoids,
                      PoolMethod::kWeightedKMedoids, PoolMethod::kRandom,
                      PoolMethod::kImportance}) {
    const PoolResult r = token_pool(f, spec_for(method, 4, true));
    ASSERT_EQ(r.tokens.size(), 5u) << to_string(method);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(r.tokens.features(0, c), f.features(0, c));
    EXPECT_EQ(r.clusters.first_clustered, 1u);
    EXPECT_EQ(r.clusters.assignment.size(), 11u);
  }
}

TEST(TokenPool, MedoidsAreExactInputRows) {
  TokenSet f{random_matrix(20, 5, 4)};
  f.weights = random_positive(20, 5);
  for (auto method : {PoolMethod::kKMedoids, PoolMethod::kWeightedKMedoids}) {
    const PoolResult r = token_pool(f, spec_for(method, 6, true));
    const auto& idx = *r.clusters.medoid_indices;
    ASSERT_EQ(idx.size(), 6u);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 6u);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      ASSERT_GE(idx[j], 1u);
      for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(r.tokens.features(j + 1, c), f.features(idx[j], c));
    }
  }
}

TEST(TokenPool, LossHistoryIsNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    TokenSet f{random_matrix(25, 3, 100 + seed)};
    f.weights = random_positive(25, 200 + seed);
    for (auto method : {PoolMethod::kKMeans, PoolMethod::kWeightedKMeans, PoolMethod::kKMedoids,
                        PoolMethod::kWeightedKMedoids}) {
      PoolSpec s = spec_for(method, 5);
      s.max_iters = 50;
      s.init = seed % 2 ? ClusterInit::kRandom : ClusterInit::kTopKWeight;
      s.seed = seed;
      const PoolResult r = token_pool(f, s);
      const auto& h = r.clusters.loss_history;
      ASSERT_GE(h.size(), 2u);
      for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1] + 1e-12) << seed;
      EXPECT_EQ(r.clusters.loss, h.back());
      // The reported loss is the (weighted) Chamfer loss of the output.
      const auto x = f.features;
      const std::vector<double> ones(25, 1.0);
      const auto& w = is_weighted(method) ? *f.weights : ones;
      EXPECT_NEAR(r.clusters.loss, chamfer_loss(x, r.clusters.centers, std::span<const double>(w)),
                  1e-12);
    }
  }
}

TEST(TokenPool, KMeansNeverBeatsExhaustiveOptimum) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TokenSet f{random_matrix(7, 2, 300 + seed)};
    PoolSpec s = spec_for(PoolMethod::kKMeans, 3);
    s.max_iters = 100;
    const double loss = token_pool(f, s).clusters.loss;
    EXPECT_GE(loss, best_partition_loss(f.features, 3) - 1e-12);
  }
}

TEST(TokenPool, TwoBlobsReachTheOptimum) {
  TokenSet f = line({-5.0, -5.2, -4.9, 5.0, 5.3, 4.8});
  PoolSpec s = spec_for(PoolMethod::kKMeans, 2);
  s.max_iters = 100;
  EXPECT_NEAR(token_pool(f, s).clusters.loss, best_partition_loss(f.features, 2), 1e-12);
}

TEST(TokenPool, TopKInitPrefersHeavyTokensWithLowIndexTies) {
  // Equal weights: the first k tokens seed the clusters; with max_iters 1 the
  // medoid of each cluster is visible directly.
  TokenSet f = line({0.0, 1.0, 2.0, 10.0});
  f.weights = std::vector<double>{1.0, 1.0, 1.0, 1.0};
  PoolSpec s = spec_for(PoolMethod::kWeightedKMedoids, 1);
  s.max_iters = 1;
  const PoolResult r = token_pool(f, s);
  EXPECT_EQ(r.clusters.loss_history.front(), 0.0 + 1.0 + 4.0 + 100.0);

  f.weights = std::vector<double>{1.0, 1.0, 1.0, 5.0};
  const PoolResult heavy = token_pool(f, s);
  EXPECT_EQ(heavy.clusters.loss_history.front(), 100.0 + 81.0 + 64.0 + 0.0);
}

TEST(TokenPool, WeightedMedoidFollowsWeight) {
  TokenSet f = line({0.0, 1.0, 2.0, 3.0});
  PoolSpec s = spec_for(PoolMethod::kKMedoids, 1);
  f.weights = std::vector<double>{1.0, 1.0, 1.0, 100.0};
  // Unweighted objective: medoid 1 (cost 6) ties with 2 (cost 6); lowest wins.
  EXPECT_EQ(token_pool(f, s).clusters.medoid_indices->front(), 1u);
  s.method = PoolMethod::kWeightedKMedoids;
  EXPECT_EQ(token_pool(f, s).clusters.medoid_indices->front(), 3u);
  s.method = PoolMethod::kWeightedKMeans;
  EXPECT_NEAR(token_pool(f, s).tokens.features(0, 0), (0.0 + 1.0 + 2.0 + 300.0) / 103.0, 1e-12);
}

TEST(TokenPool, AssignmentTiesGoToLowerCenter) {
  // Token 1 is equidistant from both centers 0 and 2.
  TokenSet f = line({0.0, 1.0, 2.0});
  f.weights = std::vector<double>{3.0, 1.0, 2.0};
  PoolSpec s = spec_for(PoolMethod::kWeightedKMedoids, 2);
  const PoolResult r = token_pool(f, s);
  EXPECT_EQ(*r.clusters.medoid_indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(r.clusters.assignment, (std::vector<std::size_t>{0, 0, 1}));
}

TEST(TokenPool, DuplicateTokensDoNotLeaveEmptyClusters) {
  TokenSet f = line({1.0, 1.0, 1.0, 1.0, 5.0});
  for (auto method : {PoolMethod::kKMeans, PoolMethod::kKMedoids}) {
    const PoolResult r = token_pool(f, spec_for(method, 3));
    std::vector<std::size_t> sizes(3, 0);
    for (auto a : r.clusters.assignment) ++sizes[a];
    for (auto s : sizes) EXPECT_GT(s, 0u) << to_string(method);
    EXPECT_EQ(r.clusters.loss, 0.0);
  }
}

TEST(TokenPool, CarryCountsAreClusterSizes) {
  TokenSet f{random_matrix(16, 3, 7)};
  f.counts = std::vector<double>(16, 2.0);
  PoolSpec s = spec_for(PoolMethod::kKMeans, 4, true);
  s.emit_counts = true;
  const PoolResult r = token_pool(f, s);
  ASSERT_TRUE(r.tokens.counts.has_value());
  ASSERT_EQ(r.tokens.counts->size(), 5u);
  EXPECT_EQ((*r.tokens.counts)[0], 2.0);
  double total = 0.0;
  for (double c : *r.tokens.counts) total += c;
  EXPECT_EQ(total, 32.0);
  for (std::size_t j = 0; j < 4; ++j) {
    const auto members = std::count(r.clusters.assignment.begin(), r.clusters.assignment.end(), j);
    EXPECT_EQ(r.clusters.counts[j], 2.0 * static_cast<double>(members));
  }
  s.emit_counts = false;
  EXPECT_FALSE(token_pool(f, s).tokens.counts.has_value());
}

TEST(TokenPool, RandomInitIsSeeded) {
  TokenSet f{random_matrix(30, 2, 8)};
  PoolSpec s = spec_for(PoolMethod::kKMeans, 4);
  s.init = ClusterInit::kRandom;
  s.max_iters = 1;
  s.seed = 5;
  const auto a = token_pool(f, s);
  const auto b = token_pool(f, s);
  EXPECT_EQ(a.tokens.features, b.tokens.features);
  s.seed = 6;
  EXPECT_NE(token_pool(f, s).clusters.loss_history.front(), a.clusters.loss_history.front());
}

TEST(TokenPool, Errors) {
  TokenSet f{random_matrix(6, 2, 9)};
  EXPECT_THROW(token_pool(f, spec_for(PoolMethod::kWeightedKMeans, 2)), UsageError);
  EXPECT_THROW(token_pool(f, spec_for(PoolMethod::kImportance, 2)), UsageError);
  EXPECT_THROW(token_pool(f, spec_for(PoolMethod::kKMeans, 0)), UsageError);
  PoolSpec s = spec_for(PoolMethod::kKMeans, 2);
  s.max_iters = 0;
  EXPECT_THROW(token_pool(f, s), UsageError);
  TokenSet bad = f;
  bad.features(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(token_pool(bad, spec_for(PoolMethod::kKMeans, 2)), DataError);
  TokenSet neg = f;
  neg.weights = std::vector<double>{1, 1, -1, 1, 1, 1};
  EXPECT_THROW(token_pool(neg, spec_for(PoolMethod::kWeightedKMeans, 2)), DataError);
  EXPECT_THROW(parse_pool_method("dbscan"), UsageError);
  EXPECT_THROW(parse_cluster_init("kmeans++"), UsageError);
}

TEST(Selection, RandomKeepsOriginalOrderAndCls) {
  TokenSet f{random_matrix(10, 2, 10)};
  const TokenSet kept = random_select(f, 4, 3, true);
  ASSERT_EQ(kept.size(), 5u);
  std::size_t last = 0;
  for (std::size_t r = 0; r < kept.size(); ++r) {
    std::size_t found = 99;
    for (std::size_t i = 0; i < 10; ++i) {
      if (f.features(i, 0) == kept.features(r, 0)) found = i;
    }
    ASSERT_NE(found, 99u);
    if (r == 0) EXPECT_EQ(found, 0u);
    if (r > 0) EXPECT_GT(found, last);
    last = found;
  }
  EXPECT_EQ(random_select(f, 9, 3, true).features, f.features);
  EXPECT_THROW(random_select(f, 11, 3, true), UsageError);
}

TEST(Selection, ImportanceFavoursHighScores) {
  TokenSet f{random_matrix(6, 2, 11)};
  ScoreVector scores{{1.0, 1e-9, 1e-9, 1e-9, 1e-9, 1.0}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TokenSet kept = importance_select(f, scores, 1, seed, true);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept.features.row(1)[0], f.features(5, 0));
  }
  EXPECT_THROW(importance_select(f, ScoreVector{{1.0}}, 1, 0, true), UsageError);
}

TEST(Selection, ViaTokenPoolReportsNearestSurvivor) {
  TokenSet f = line({0.0, 1.0, 5.0, 6.0});
  f.weights = std::vector<double>{1.0, 1.0, 1.0, 1.0};
  PoolSpec s = spec_for(PoolMethod::kRandom, 2);
  s.seed = 2;
  const PoolResult r = token_pool(f, s);
  EXPECT_NEAR(r.clusters.loss, chamfer_loss(f.features, r.tokens.features), 1e-15);
  EXPECT_EQ(r.clusters.medoid_indices->size(), 2u);
}

TEST(GridPool, AveragesTwoByTwoPatchesAfterCls) {
  // 1 CLS + 4x4 grid; token value = its patch index.
  Matrix x(17, 1);
  x(0, 0) = -1.0;
  for (std::size_t i = 0; i < 16; ++i) x(i + 1, 0) = static_cast<double>(i);
  TokenSet f{x};
  f.grid = GridShape{4, 4};
  f.counts = std::vector<double>(17, 1.0);
  const TokenSet g = grid_pool(f);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_EQ(g.features(0, 0), -1.0);
  EXPECT_EQ(g.features(1, 0), (0.0 + 1 + 4 + 5) / 4);
  EXPECT_EQ(g.features(2, 0), (2.0 + 3 + 6 + 7) / 4);
  EXPECT_EQ(g.features(3, 0), (8.0 + 9 + 12 + 13) / 4);
  EXPECT_EQ(g.features(4, 0), (10.0 + 11 + 14 + 15) / 4);
  EXPECT_EQ(*g.grid, (GridShape{2, 2}));
  EXPECT_EQ(*g.counts, (std::vector<double>{1, 4, 4, 4, 4}));

  PoolSpec s = spec_for(PoolMethod::kGrid, 1, true);
  s.emit_counts = true;
  f.counts.reset();
  const PoolResult r = token_pool(f, s);
  EXPECT_EQ(r.tokens.features, g.features);
  EXPECT_EQ(*r.tokens.counts, (std::vector<double>{1, 4, 4, 4, 4}));
  EXPECT_EQ(r.clusters.assignment[5], 0u);
  EXPECT_EQ(r.clusters.assignment[6], 1u);
  EXPECT_EQ(r.clusters.assignment[15], 3u);
}

TEST(GridPool, Errors) {
  TokenSet f{random_matrix(10, 2, 12)};
  EXPECT_THROW(grid_pool(f), UsageError);
  f.grid = GridShape{3, 3};
  EXPECT_THROW(grid_pool(f), UsageError);
  f.grid = GridShape{2, 4};
  EXPECT_THROW(grid_pool(f), UsageError);
}

}  // namespace
}  // namespace tokpool
