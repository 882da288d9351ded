// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/transformer.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tokpool/error.hpp"
#include "tokpool/numerics.hpp"
#include "tokpool/rng.hpp"

namespace tokpool {
namespace {

void check_positive(const std::optional<std::vector<double>>& values, std::size_t n,
                    const char* what) {
  if (!values) return;
  if (values->size() != n) {
    throw DataError(std::string(what) + " length " + std::to_string(values->size()) +
                    " does not match token count " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double v = (*values)[i];
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DataError(std::string(what) + " " + std::to_string(i) + " is not a positive number");
    }
  }
}

void check_inputs(const TokenSet& tokens, const BlockWeights& w, AttentionMode mode) {
  w.validate();
  if (tokens.size() == 0) throw DataError("token set is empty");
  if (tokens.dim() != w.dim()) {
    throw DataError("token width " + std::to_string(tokens.dim()) + " does not match block width " +
                    std::to_string(w.dim()));
  }
  if (!tokens.features.all_finite()) throw DataError("token features contain NaN or Inf");
  if (mode == AttentionMode::kCarry && !tokens.counts) {
    throw UsageError("carry attention requires per-token counts");
  }
  if (mode == AttentionMode::kNormalizedAlpha && !w.alpha) {
    throw UsageError("normalized_alpha attention requires alpha in the block weights");
  }
  if (tokens.counts) check_positive(tokens.counts, tokens.size(), "count");
}

void normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double norm2 = 0.0;
    for (double v : row) norm2 += v * v;
    if (norm2 == 0.0) continue;
    const double norm = std::sqrt(norm2);
    for (double& v : row) v /= norm;
  }
}

// Row softmax of `logits` in place. With carry counts, key j's exponential
// is scaled by counts[j]; the operation order is otherwise identical, so unit
// counts give bit-identical results.
void softmax_in_place(Matrix& logits, const std::vector<double>* counts) {
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    double max = -std::numeric_limits<double>::infinity();
    for (double v : row) max = std::max(max, v);
    double sum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      double e = std::exp(row[j] - max);
      if (counts) e *= (*counts)[j];
      row[j] = e;
      sum += e;
    }
    for (double& v : row) v /= sum;
  }
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  auto dst = out.data();
  const auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

Matrix mlp(const Matrix& x, const BlockWeights& w) {
  return matmul(gelu(matmul(x, w.mlp1)), w.mlp2);
}

}  // namespace

void TokenSet::validate() const {
  if (features.rows() == 0) throw DataError("token set is empty");
  if (!features.all_finite()) throw DataError("token features contain NaN or Inf");
  check_positive(weights, size(), "weight");
  check_positive(counts, size(), "count");
  if (grid) {
    const std::size_t area = grid->height * grid->width;
    if (area != size() && area + 1 != size()) {
      throw DataError("grid " + std::to_string(grid->height) + "x" + std::to_string(grid->width) +
                      " does not cover the " + std::to_string(size()) + " tokens");
    }
  }
}

void BlockWeights::validate() const {
  const std::size_t h = wq.size();
  if (h == 0) throw UsageError("block has no attention heads");
  if (wk.size() != h || wv.size() != h) throw UsageError("block has unequal Q/K/V head counts");
  const std::size_t m = wo.rows();
  if (wo.cols() != m) throw UsageError("W^O must be square");
  if (m % h != 0) {
    throw UsageError("width " + std::to_string(m) + " is not divisible by " + std::to_string(h) +
                     " heads");
  }
  const std::size_t d = m / h;
  for (std::size_t i = 0; i < h; ++i) {
    for (const Matrix* p : {&wq[i], &wk[i], &wv[i]}) {
      if (p->rows() != m || p->cols() != d) {
        throw UsageError("head " + std::to_string(i) + " projection is not " + std::to_string(m) +
                         "x" + std::to_string(d));
      }
    }
  }
  if (mlp1.rows() != m || mlp2.cols() != m || mlp1.cols() != mlp2.rows() || mlp1.cols() == 0) {
    throw UsageError("MLP weights do not chain M -> rM -> M");
  }
  for (const auto* ln : {&ln1, &ln2}) {
    if ((!ln->gamma.empty() && ln->gamma.size() != m) || (!ln->beta.empty() && ln->beta.size() != m)) {
      throw UsageError("layer norm parameters do not match width");
    }
  }
  if (alpha && !(*alpha > 0.0 && std::isfinite(*alpha))) {
    throw UsageError("alpha must be positive and finite");
  }
}

std::vector<HeadTrace> attention_heads(const TokenSet& tokens, const BlockWeights& w,
                                       AttentionMode mode) {
  check_inputs(tokens, w, mode);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(w.head_dim()));
  const std::vector<double>* counts = mode == AttentionMode::kCarry ? &*tokens.counts : nullptr;

  std::vector<HeadTrace> heads;
  heads.reserve(w.heads());
  for (std::size_t h = 0; h < w.heads(); ++h) {
    Matrix q = matmul(tokens.features, w.wq[h]);
    Matrix k = matmul(tokens.features, w.wk[h]);
    Matrix v = matmul(tokens.features, w.wv[h]);
    double scale = inv_sqrt_d;
    if (mode == AttentionMode::kNormalizedAlpha) {
      normalize_rows(q);
      normalize_rows(k);
      scale = *w.alpha;
    }
    Matrix logits = matmul(q, k.transpose());
    for (double& x : logits.data()) x *= scale;
    softmax_in_place(logits, counts);
    Matrix out = matmul(logits, v);
    heads.push_back({std::move(logits), std::move(v), std::move(out)});
  }
  return heads;
}

TokenSet msa_forward(const TokenSet& tokens, const BlockWeights& w, AttentionMode mode) {
  const auto heads = attention_heads(tokens, w, mode);
  std::vector<Matrix> outputs;
  outputs.reserve(heads.size());
  for (const auto& h : heads) outputs.push_back(h.output);
  TokenSet out = tokens;
  out.features = matmul(hconcat(outputs), w.wo);
  return out;
}

AttentionMaps attention_maps(const TokenSet& tokens, const BlockWeights& w, AttentionMode mode) {
  auto heads = attention_heads(tokens, w, mode);
  AttentionMaps maps;
  maps.heads.reserve(heads.size());
  for (auto& h : heads) maps.heads.push_back(std::move(h.attention));
  return maps;
}

BlockTrace block_forward_traced(const TokenSet& tokens, const BlockWeights& w, AttentionMode mode,
                                const BlockOptions& options) {
  TokenSet attn_in = tokens;
  if (options.residual_and_norm) {
    attn_in.features = layer_norm(tokens.features, w.ln1, options.layer_norm_eps);
  }
  auto heads = attention_heads(attn_in, w, mode);
  std::vector<Matrix> outputs;
  outputs.reserve(heads.size());
  for (const auto& h : heads) outputs.push_back(h.output);
  const Matrix attn = matmul(hconcat(outputs), w.wo);

  TokenSet out = tokens;
  if (options.residual_and_norm) {
    const Matrix mid = add(tokens.features, attn);
    out.features = add(mid, mlp(layer_norm(mid, w.ln2, options.layer_norm_eps), w));
  } else {
    out.features = mlp(attn, w);
  }
  return {std::move(out), std::move(heads)};
}

TokenSet block_forward(const TokenSet& tokens, const BlockWeights& w, AttentionMode mode,
                       const BlockOptions& options) {
  return block_forward_traced(tokens, w, mode, options).output;
}

Matrix layer_norm(const Matrix& x, const LayerNormParams& params, double eps) {
  Matrix out(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) {
      double y = (in[c] - mean) * inv_std;
      if (!params.gamma.empty()) y *= params.gamma[c];
      if (!params.beta.empty()) y += params.beta[c];
      dst[c] = y;
    }
  }
  return out;
}

Matrix gelu(Matrix x) {
  for (double& v : x.data()) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  return x;
}

std::vector<BlockWeights> synth_weights(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t m = config.dim;
  const std::size_t h = config.heads;
  const std::size_t d = config.head_dim();
  const std::size_t hidden = config.mlp_ratio * m;
  const double stddev = 1.0 / std::sqrt(static_cast<double>(m));
  Rng rng(seed);
  auto draw = [&](std::size_t rows, std::size_t cols) {
    Matrix out(rows, cols);
    for (double& v : out.data()) v = rng.normal() * stddev;
    return out;
  };

  std::optional<double> alpha = config.alpha;
  if (!alpha && config.mode == AttentionMode::kNormalizedAlpha) alpha = 1.0;

  std::vector<BlockWeights> blocks(config.layers);
  for (auto& b : blocks) {
    for (auto* group : {&b.wq, &b.wk, &b.wv}) {
      group->reserve(h);
      for (std::size_t i = 0; i < h; ++i) group->push_back(draw(m, d));
    }
    b.wo = draw(m, m);
    b.mlp1 = draw(m, hidden);
    b.mlp2 = draw(hidden, m);
    b.alpha = alpha;
  }
  return blocks;
}

}  // namespace tokpool
