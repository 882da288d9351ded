// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/filterlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tokpool/error.hpp"
#include "tokpool/numerics.hpp"
#include "tokpool/rng.hpp"

namespace tokpool {
namespace {

void check_shapes(const Matrix& queries, const Matrix& keys, const Matrix& values, double alpha) {
  if (queries.cols() != keys.cols()) throw DataError("queries and keys differ in width");
  if (keys.rows() != values.rows()) throw DataError("keys and values differ in count");
  if (keys.rows() == 0) throw DataError("probe has no keys");
  if (!queries.all_finite() || !keys.all_finite() || !values.all_finite()) {
    throw DataError("probe contains NaN or Inf");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DataError("alpha must be positive");
}

// out[q] = sum_i exp(logit(q, i) - max) v_i / sum_i exp(logit(q, i) - max)
template <typename Logit>
Matrix kernel_average(const Matrix& queries, const Matrix& values, std::size_t n_keys,
                      Logit&& logit) {
  Matrix out(queries.rows(), values.cols());
  std::vector<double> g(n_keys);
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    double max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_keys; ++i) {
      g[i] = logit(q, i);
      max = std::max(max, g[i]);
    }
    double z = 0.0;
    auto dst = out.row(q);
    for (std::size_t i = 0; i < n_keys; ++i) {
      const double e = std::exp(g[i] - max);
      z += e;
      const auto v = values.row(i);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += e * v[c];
    }
    for (double& v : dst) v /= z;
  }
  return out;
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void scale_rows_to(Matrix& m, Rng* rng) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double norm2 = 0.0;
    for (double v : row) norm2 += v * v;
    double target = 1.0;
    if (rng) target = 0.5 + 1.5 * rng->uniform();
    const double s = target / std::sqrt(norm2);
    for (double& v : row) v *= s;
  }
}

}  // namespace

void FilterProbe::validate() const {
  check_shapes(queries, keys, values, alpha);
  constexpr double kNormTolerance = 1e-9;
  for (const Matrix* m : {&queries, &keys}) {
    for (std::size_t r = 0; r < m->rows(); ++r) {
      double norm2 = 0.0;
      for (double v : m->row(r)) norm2 += v * v;
      if (std::abs(std::sqrt(norm2) - 1.0) > kNormTolerance) {
        throw DataError(std::string(m == &queries ? "query" : "key") + " row " +
                        std::to_string(r) + " does not have unit norm");
      }
    }
  }
}

Matrix attention_form_unchecked(const Matrix& queries, const Matrix& keys, const Matrix& values,
                                double alpha) {
  check_shapes(queries, keys, values, alpha);
  return kernel_average(queries, values, keys.rows(), [&](std::size_t q, std::size_t i) {
    const auto a = queries.row(q);
    const auto b = keys.row(i);
    double dot = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) dot += a[c] * b[c];
    return alpha * dot;
  });
}

Matrix filter_form_unchecked(const Matrix& queries, const Matrix& keys, const Matrix& values,
                             double alpha) {
  check_shapes(queries, keys, values, alpha);
  return kernel_average(queries, values, keys.rows(), [&](std::size_t q, std::size_t i) {
    return -0.5 * alpha * sq_dist(queries.row(q), keys.row(i));
  });
}

Matrix attention_form(const FilterProbe& probe) {
  probe.validate();
  return attention_form_unchecked(probe.queries, probe.keys, probe.values, probe.alpha);
}

Matrix filter_form(const FilterProbe& probe) {
  probe.validate();
  return filter_form_unchecked(probe.queries, probe.keys, probe.values, probe.alpha);
}

FilterProbe random_probe(std::size_t n, std::size_t m, double alpha, std::uint64_t seed,
                         KeyNorms norms) {
  if (n == 0 || m == 0) throw UsageError("probe needs n >= 1 and m >= 1");
  Rng rng(seed);
  FilterProbe p;
  p.queries = gaussian_matrix(rng, n, m);
  p.keys = gaussian_matrix(rng, n, m);
  p.values = gaussian_matrix(rng, n, m);
  p.alpha = alpha;
  scale_rows_to(p.queries, nullptr);
  scale_rows_to(p.keys, norms == KeyNorms::kRandom ? &rng : nullptr);
  return p;
}

EquivalenceReport verify_equivalence(std::size_t n, std::size_t m, double alpha,
                                     std::uint64_t seed, double tol, KeyNorms norms) {
  if (!(tol > 0.0)) throw UsageError("tolerance must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw UsageError("alpha must be positive");
  const FilterProbe p = random_probe(n, m, alpha, seed, norms);
  const Matrix a = attention_form_unchecked(p.queries, p.keys, p.values, p.alpha);
  const Matrix f = filter_form_unchecked(p.queries, p.keys, p.values, p.alpha);
  double dev = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    dev = std::max(dev, std::abs(a.data()[i] - f.data()[i]));
  }
  return {dev, dev < tol};
}

}  // namespace tokpool
