// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tokpool/error.hpp"
#include "tokpool/numerics.hpp"
#include "tokpool/rng.hpp"

namespace tokpool {
namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

struct Assignment {
  std::vector<std::size_t> cluster;
  std::vector<double> sq_error;  // distance to the assigned center
};

// Nearest center per row of `dists` (rows: tokens, cols: centers); ties go
// to the lower center index.
Assignment nearest(const Matrix& dists) {
  Assignment a{std::vector<std::size_t>(dists.rows()), std::vector<double>(dists.rows())};
  for (std::size_t i = 0; i < dists.rows(); ++i) {
    std::size_t best = 0;
    double best_d = dists(i, 0);
    for (std::size_t j = 1; j < dists.cols(); ++j) {
      if (dists(i, j) < best_d) {
        best_d = dists(i, j);
        best = j;
      }
    }
    a.cluster[i] = best;
    a.sq_error[i] = best_d;
  }
  return a;
}

double weighted_sum(std::span<const double> err, std::span<const double> w) {
  double total = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) total += w[i] * err[i];
  return total;
}

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

bool has_empty_cluster(const std::vector<std::size_t>& cluster, std::size_t k) {
  std::vector<bool> seen(k, false);
  for (std::size_t c : cluster) seen[c] = true;
  return std::find(seen.begin(), seen.end(), false) != seen.end();
}

// Rows poolable under `protect_first`.
std::size_t first_poolable(const TokenSet& f, bool protect_first) {
  return protect_first && f.size() > 0 ? 1 : 0;
}

std::vector<double> slice(const std::vector<double>& v, std::size_t offset) {
  return {v.begin() + static_cast<std::ptrdiff_t>(offset), v.end()};
}

// Clustering state for one token_pool call over the poolable rows.
class Clusterer {
 public:
  Clusterer(const Matrix& x, std::vector<double> objective_weights, bool medoid, std::size_t k)
      : x_(x), w_(std::move(objective_weights)), medoid_(medoid), k_(k) {
    if (medoid_) token_dists_ = pairwise_sq_dists(x_, x_);
  }

  void init(std::span<const std::size_t> seeds) {
    medoids_.assign(seeds.begin(), seeds.end());
    centers_ = x_.select_rows(seeds);
  }

  Assignment assign() const {
    if (!medoid_) return nearest(pairwise_sq_dists(x_, centers_));
    Matrix d(x_.rows(), k_);
    for (std::size_t i = 0; i < x_.rows(); ++i) {
      for (std::size_t j = 0; j < k_; ++j) d(i, j) = token_dists_(i, medoids_[j]);
    }
    return nearest(d);
  }

  double loss(const Assignment& a) const { return weighted_sum(a.sq_error, w_); }

  // Recomputes every nonempty cluster's center, then repairs empty ones.
  void update(Assignment& a) {
    const auto members = members_of(a.cluster);
    for (std::size_t j = 0; j < k_; ++j) {
      if (members[j].empty()) continue;
      if (medoid_) {
        set_medoid(j, best_medoid(members[j]));
      } else {
        set_mean(j, members[j]);
      }
    }
    refresh_errors(a);
    repair_empty(a);
  }

  // Gives each empty cluster the token with the largest weighted error among
  // tokens whose cluster has at least two members (lowest index on ties).
  // Removing that token's error cannot raise the objective, and no other
  // cluster is emptied. Returns true if anything moved.
  bool repair_empty(Assignment& a) {
    std::vector<std::size_t> sizes(k_, 0);
    for (std::size_t c : a.cluster) ++sizes[c];
    bool moved = false;
    for (std::size_t j = 0; j < k_; ++j) {
      if (sizes[j] != 0) continue;
      std::size_t pick = kNone;
      double worst = -1.0;
      for (std::size_t i = 0; i < x_.rows(); ++i) {
        if (sizes[a.cluster[i]] < 2) continue;
        const double e = w_[i] * a.sq_error[i];
        if (e > worst) {
          worst = e;
          pick = i;
        }
      }
      if (pick == kNone) break;  // fewer tokens than clusters
      --sizes[a.cluster[pick]];
      ++sizes[j];
      a.cluster[pick] = j;
      a.sq_error[pick] = 0.0;
      medoids_.resize(k_);
      medoids_[j] = pick;
      auto dst = centers_.row(j);
      const auto src = x_.row(pick);
      std::copy(src.begin(), src.end(), dst.begin());
      moved = true;
    }
    return moved;
  }

  const Matrix& centers() const { return centers_; }
  const std::vector<std::size_t>& medoids() const { return medoids_; }

 private:
  std::vector<std::vector<std::size_t>> members_of(const std::vector<std::size_t>& cluster) const {
    std::vector<std::vector<std::size_t>> members(k_);
    for (std::size_t i = 0; i < cluster.size(); ++i) members[cluster[i]].push_back(i);
    return members;
  }

  std::size_t best_medoid(const std::vector<std::size_t>& members) const {
    std::size_t best = members.front();
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t candidate : members) {
      double cost = 0.0;
      for (std::size_t other : members) cost += w_[other] * token_dists_(candidate, other);
      if (cost < best_cost) {
        best_cost = cost;
        best = candidate;
      }
    }
    return best;
  }

  void set_medoid(std::size_t j, std::size_t token) {
    medoids_[j] = token;
    const auto src = x_.row(token);
    std::copy(src.begin(), src.end(), centers_.row(j).begin());
  }

  void set_mean(std::size_t j, const std::vector<std::size_t>& members) {
    auto dst = centers_.row(j);
    std::fill(dst.begin(), dst.end(), 0.0);
    double total = 0.0;
    for (std::size_t i : members) {
      const auto src = x_.row(i);
      for (std::size_t m = 0; m < dst.size(); ++m) dst[m] += w_[i] * src[m];
      total += w_[i];
    }
    for (double& v : dst) v /= total;
  }

  void refresh_errors(Assignment& a) const {
    for (std::size_t i = 0; i < x_.rows(); ++i) {
      const std::size_t j = a.cluster[i];
      a.sq_error[i] = medoid_ ? token_dists_(i, medoids_[j]) : sq_dist(x_.row(i), centers_.row(j));
    }
  }

  const Matrix& x_;
  std::vector<double> w_;
  bool medoid_;
  std::size_t k_;
  Matrix token_dists_;
  Matrix centers_;
  std::vector<std::size_t> medoids_;
};

std::vector<std::size_t> top_k_by_weight(std::span<const double> weights, std::size_t k) {
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  order.resize(k);
  return order;
}

std::vector<double> carry_counts(const TokenSet& f) {
  return f.counts ? *f.counts : ones(f.size());
}

// Builds the pooled token set: protected row (if any) then `centers`.
TokenSet assemble(const TokenSet& f, std::size_t offset, const Matrix& centers,
                  const std::vector<double>& cluster_counts, bool emit_counts) {
  TokenSet out;
  out.features = offset ? vstack(f.features.slice_rows(0, 1), centers) : centers;
  if (emit_counts) {
    std::vector<double> counts;
    counts.reserve(out.size());
    if (offset) counts.push_back(f.counts ? (*f.counts)[0] : 1.0);
    counts.insert(counts.end(), cluster_counts.begin(), cluster_counts.end());
    out.counts = std::move(counts);
  }
  return out;
}

std::vector<double> counts_per_cluster(const std::vector<std::size_t>& assignment, std::size_t k,
                                       const std::vector<double>& token_counts,
                                       std::size_t offset) {
  std::vector<double> counts(k, 0.0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    counts[assignment[i]] += token_counts[offset + i];
  }
  return counts;
}

void check_features(const TokenSet& f) {
  if (f.size() == 0) throw DataError("token set is empty");
  if (!f.features.all_finite()) throw DataError("token features contain NaN or Inf");
}

// Selected poolable rows (relative indices) -> pooled set in original order.
TokenSet keep_rows(const TokenSet& f, std::size_t offset, std::vector<std::size_t> picked) {
  std::sort(picked.begin(), picked.end());
  std::vector<std::size_t> rows;
  rows.reserve(picked.size() + offset);
  if (offset) rows.push_back(0);
  for (std::size_t p : picked) rows.push_back(p + offset);
  TokenSet out;
  out.features = f.features.select_rows(rows);
  auto pick = [&](const std::optional<std::vector<double>>& v) -> std::optional<std::vector<double>> {
    if (!v) return std::nullopt;
    std::vector<double> r;
    r.reserve(rows.size());
    for (std::size_t i : rows) r.push_back((*v)[i]);
    return r;
  };
  out.weights = pick(f.weights);
  out.counts = pick(f.counts);
  return out;
}

std::vector<std::size_t> importance_pick(const TokenSet& f, std::span<const double> scores,
                                         std::size_t k, std::uint64_t seed, std::size_t offset) {
  if (scores.size() != f.size()) {
    throw UsageError("score vector length " + std::to_string(scores.size()) +
                     " does not match token count " + std::to_string(f.size()));
  }
  Rng rng(seed);
  return sample_without_replacement(rng, f.size() - offset, k, scores.subspan(offset));
}

std::vector<std::size_t> uniform_pick(const TokenSet& f, std::size_t k, std::uint64_t seed,
                                      std::size_t offset) {
  Rng rng(seed);
  return sample_without_replacement(rng, f.size() - offset, k);
}

// ClusterResult for selection baselines: centers are the kept tokens and
// every token maps to its nearest survivor.
PoolResult selection_result(const TokenSet& f, std::size_t offset, std::vector<std::size_t> picked,
                            const PoolSpec& spec) {
  std::sort(picked.begin(), picked.end());
  const Matrix x = f.features.slice_rows(offset, f.size());
  ClusterResult cr;
  cr.first_clustered = offset;
  cr.centers = x.select_rows(picked);
  const Assignment a = nearest(pairwise_sq_dists(x, cr.centers));
  cr.assignment = a.cluster;
  std::vector<std::size_t> medoids;
  for (std::size_t p : picked) medoids.push_back(p + offset);
  cr.medoid_indices = std::move(medoids);
  cr.loss = weighted_sum(a.sq_error, ones(x.rows()));
  cr.loss_history = {cr.loss};
  cr.counts = counts_per_cluster(cr.assignment, picked.size(), carry_counts(f), offset);
  TokenSet out = keep_rows(f, offset, picked);
  if (spec.emit_counts) {
    std::vector<double> counts;
    if (offset) counts.push_back(f.counts ? (*f.counts)[0] : 1.0);
    counts.insert(counts.end(), cr.counts.begin(), cr.counts.end());
    out.counts = std::move(counts);
  }
  return {std::move(out), std::move(cr)};
}

PoolResult unchanged(const TokenSet& f, std::size_t offset, bool medoid) {
  ClusterResult cr;
  cr.first_clustered = offset;
  const std::size_t n = f.size() - offset;
  cr.assignment.resize(n);
  std::iota(cr.assignment.begin(), cr.assignment.end(), std::size_t{0});
  cr.centers = f.features.slice_rows(offset, f.size());
  if (medoid) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), offset);
    cr.medoid_indices = std::move(rows);
  }
  cr.counts = slice(carry_counts(f), offset);
  return {f, std::move(cr)};
}

PoolResult grid_result(const TokenSet& f, const PoolSpec& spec) {
  TokenSet pooled = grid_pool(f);
  const std::size_t offset = f.grid->height * f.grid->width + 1 == f.size() ? 1 : 0;
  const std::size_t w = f.grid->width;
  const std::size_t out_w = w / 2;
  ClusterResult cr;
  cr.first_clustered = offset;
  cr.centers = pooled.features.slice_rows(offset, pooled.size());
  const std::size_t n = f.size() - offset;
  cr.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) cr.assignment[i] = (i / w / 2) * out_w + (i % w) / 2;
  const Matrix x = f.features.slice_rows(offset, f.size());
  cr.loss = chamfer_loss(x, cr.centers);
  cr.loss_history = {cr.loss};
  cr.counts = counts_per_cluster(cr.assignment, cr.centers.rows(), carry_counts(f), offset);
  if (!spec.emit_counts) {
    pooled.counts.reset();
  } else if (!pooled.counts) {
    std::vector<double> counts;
    if (offset) counts.push_back(1.0);
    counts.insert(counts.end(), cr.counts.begin(), cr.counts.end());
    pooled.counts = std::move(counts);
  }
  return {std::move(pooled), std::move(cr)};
}

}  // namespace

std::string_view to_string(PoolMethod method) noexcept {
  switch (method) {
    case PoolMethod::kKMeans:
      return "kmeans";
    case PoolMethod::kWeightedKMeans:
      return "wkmeans";
    case PoolMethod::kKMedoids:
      return "kmedoids";
    case PoolMethod::kWeightedKMedoids:
      return "wkmedoids";
    case PoolMethod::kRandom:
      return "random";
    case PoolMethod::kImportance:
      return "importance";
    case PoolMethod::kGrid:
      return "grid";
  }
  return "kmeans";
}

PoolMethod parse_pool_method(std::string_view text) {
  for (auto m : {PoolMethod::kKMeans, PoolMethod::kWeightedKMeans, PoolMethod::kKMedoids,
                 PoolMethod::kWeightedKMedoids, PoolMethod::kRandom, PoolMethod::kImportance,
                 PoolMethod::kGrid}) {
    if (text == to_string(m)) return m;
  }
  throw UsageError("unknown pooling method '" + std::string(text) + "'");
}

std::string_view to_string(ClusterInit init) noexcept {
  return init == ClusterInit::kRandom ? "random" : "topk";
}

ClusterInit parse_cluster_init(std::string_view text) {
  if (text == "topk" || text == "topk_weight") return ClusterInit::kTopKWeight;
  if (text == "random") return ClusterInit::kRandom;
  throw UsageError("unknown cluster init '" + std::string(text) + "'");
}

bool is_weighted(PoolMethod method) noexcept {
  return method == PoolMethod::kWeightedKMeans || method == PoolMethod::kWeightedKMedoids;
}

bool is_medoid(PoolMethod method) noexcept {
  return method == PoolMethod::kKMedoids || method == PoolMethod::kWeightedKMedoids;
}

void PoolSpec::validate() const {
  if (k < 1) throw UsageError("k must be >= 1");
  if (max_iters < 1) throw UsageError("max_iters must be >= 1");
}

double chamfer_loss(const Matrix& f, const Matrix& fhat,
                    std::optional<std::span<const double>> weights) {
  if (f.cols() != fhat.cols()) {
    throw DataError("chamfer_loss: feature dimensions differ (" + std::to_string(f.cols()) +
                    " vs " + std::to_string(fhat.cols()) + ")");
  }
  if (fhat.rows() == 0) throw DataError("chamfer_loss: reconstruction set is empty");
  if (weights && weights->size() != f.rows()) {
    throw DataError("chamfer_loss: weight count does not match token count");
  }
  const Assignment a = nearest(pairwise_sq_dists(f, fhat));
  return weights ? weighted_sum(a.sq_error, *weights) : weighted_sum(a.sq_error, ones(f.rows()));
}

PoolResult token_pool(const TokenSet& f, const PoolSpec& spec) {
  spec.validate();
  check_features(f);
  const std::size_t offset = first_poolable(f, spec.protect_first);
  const std::size_t n = f.size() - offset;

  if (spec.method == PoolMethod::kGrid) {
    return grid_result(f, spec);
  }
  if (is_weighted(spec.method) && !f.weights) {
    throw UsageError(std::string(to_string(spec.method)) + " requires per-token weights");
  }
  if (spec.method == PoolMethod::kImportance && !f.weights) {
    throw UsageError("importance selection requires per-token scores as weights");
  }
  f.validate();
  if (spec.k >= n) return unchanged(f, offset, is_medoid(spec.method));

  if (spec.method == PoolMethod::kRandom) {
    return selection_result(f, offset, uniform_pick(f, spec.k, spec.seed, offset), spec);
  }
  if (spec.method == PoolMethod::kImportance) {
    return selection_result(f, offset, importance_pick(f, *f.weights, spec.k, spec.seed, offset),
                            spec);
  }

  const Matrix x = f.features.slice_rows(offset, f.size());
  const std::vector<double> init_weights = f.weights ? slice(*f.weights, offset) : ones(n);
  std::vector<double> objective = is_weighted(spec.method) ? init_weights : ones(n);
  const bool medoid = is_medoid(spec.method);

  Clusterer clusterer(x, std::move(objective), medoid, spec.k);
  if (spec.init == ClusterInit::kTopKWeight) {
    clusterer.init(top_k_by_weight(init_weights, spec.k));
  } else {
    Rng rng(spec.seed);
    clusterer.init(sample_without_replacement(rng, n, spec.k));
  }

  ClusterResult cr;
  cr.first_clustered = offset;
  Assignment a = clusterer.assign();
  cr.loss_history.push_back(clusterer.loss(a));
  for (std::size_t it = 1; it <= spec.max_iters; ++it) {
    clusterer.update(a);
    cr.iterations = it;
    Assignment next = clusterer.assign();
    cr.loss_history.push_back(clusterer.loss(next));
    const bool stable = next.cluster == a.cluster;
    a = std::move(next);
    if (stable) break;
  }
  if (clusterer.repair_empty(a)) {
    // Repaired centers are token rows; recompute the nearest-center loss.
    // Only exact distance ties (duplicate tokens) can empty a cluster again;
    // then the repaired assignment is kept so every cluster has a member.
    Assignment nearest_a = clusterer.assign();
    cr.loss_history.push_back(clusterer.loss(nearest_a));
    if (!has_empty_cluster(nearest_a.cluster, spec.k)) a = std::move(nearest_a);
  }

  cr.assignment = a.cluster;
  cr.centers = clusterer.centers();
  if (medoid) {
    std::vector<std::size_t> rows;
    for (std::size_t m : clusterer.medoids()) rows.push_back(m + offset);
    cr.medoid_indices = std::move(rows);
  }
  cr.loss = cr.loss_history.back();
  cr.counts = counts_per_cluster(cr.assignment, spec.k, carry_counts(f), offset);
  TokenSet out = assemble(f, offset, cr.centers, cr.counts, spec.emit_counts);
  return {std::move(out), std::move(cr)};
}

TokenSet random_select(const TokenSet& f, std::size_t k, std::uint64_t seed, bool protect_first) {
  check_features(f);
  if (k > f.size()) {
    throw UsageError("cannot keep " + std::to_string(k) + " of " + std::to_string(f.size()) +
                     " tokens");
  }
  const std::size_t offset = first_poolable(f, protect_first);
  if (k >= f.size() - offset) return f;
  return keep_rows(f, offset, uniform_pick(f, k, seed, offset));
}

TokenSet importance_select(const TokenSet& f, const ScoreVector& scores, std::size_t k,
                           std::uint64_t seed, bool protect_first) {
  check_features(f);
  if (k > f.size()) {
    throw UsageError("cannot keep " + std::to_string(k) + " of " + std::to_string(f.size()) +
                     " tokens");
  }
  const std::size_t offset = first_poolable(f, protect_first);
  if (scores.values.size() != f.size()) {
    throw UsageError("score vector length does not match token count");
  }
  if (k >= f.size() - offset) return f;
  return keep_rows(f, offset, importance_pick(f, scores.values, k, seed, offset));
}

TokenSet grid_pool(const TokenSet& f) {
  check_features(f);
  if (!f.grid) throw UsageError("grid pooling requires a token grid");
  const auto [h, w] = *f.grid;
  const std::size_t area = h * w;
  std::size_t offset = 0;
  if (area + 1 == f.size()) {
    offset = 1;
  } else if (area != f.size()) {
    throw UsageError("grid " + std::to_string(h) + "x" + std::to_string(w) + " does not match " +
                     std::to_string(f.size()) + " tokens");
  }
  if (h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0) {
    throw UsageError("grid pooling needs even grid dimensions, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  const std::size_t m = f.dim();
  Matrix pooled(oh * ow, m);
  std::optional<std::vector<double>> counts;
  if (f.counts) counts.emplace(oh * ow, 0.0);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      const std::size_t cell = r * ow + c;
      const std::size_t tl = offset + (2 * r) * w + 2 * c;
      const std::size_t patch[4] = {tl, tl + 1, tl + w, tl + w + 1};
      auto dst = pooled.row(cell);
      for (std::size_t k = 0; k < m; ++k) {
        double sum = 0.0;
        for (std::size_t p : patch) sum += f.features(p, k);
        dst[k] = sum / 4.0;
      }
      if (counts) {
        for (std::size_t p : patch) (*counts)[cell] += (*f.counts)[p];
      }
    }
  }
  TokenSet out;
  out.features = offset ? vstack(f.features.slice_rows(0, 1), pooled) : pooled;
  if (counts) {
    if (offset) counts->insert(counts->begin(), (*f.counts)[0]);
    out.counts = std::move(counts);
  }
  out.grid = GridShape{oh, ow};
  return out;
}

}  // namespace tokpool
