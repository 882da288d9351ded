// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "tokpool/matrix.hpp"

namespace tokpool {

/// Queries and keys with unit l2 rows, values of any width, and the
/// attention sharpness alpha.
struct FilterProbe {
  Matrix queries;  // N_q x M
  Matrix keys;     // N x M
  Matrix values;   // N x M_v
  double alpha = 1.0;

  /// Throws DataError unless every query/key row has norm 1 within 1e-9,
  /// shapes agree, entries are finite and alpha > 0.
  void validate() const;
};

/// o(q) = sum_i exp(alpha q.k_i) v_i / sum_i exp(alpha q.k_i), evaluated
/// with max subtraction.
Matrix attention_form(const FilterProbe& probe);

/// o(q) = sum_i exp(-alpha/2 |q - k_i|^2) v_i / z'(q): the sparse value
/// signal convolved with a Gaussian of variance 1/alpha, sampled at q.
Matrix filter_form(const FilterProbe& probe);

/// Both forms without the unit-norm precondition; for counterexamples.
Matrix attention_form_unchecked(const Matrix& queries, const Matrix& keys, const Matrix& values,
                                double alpha);
Matrix filter_form_unchecked(const Matrix& queries, const Matrix& keys, const Matrix& values,
                             double alpha);

enum class KeyNorms {
  kUnit,    // queries and keys normalised to unit length
  kRandom,  // keys rescaled to norms drawn uniformly from [0.5, 2]
};

struct EquivalenceReport {
  double max_abs_dev = 0.0;
  bool pass = false;
};

/// Builds a seeded probe (n tokens, width m, values width m, Gaussian
/// entries) and compares the two forms. Throws UsageError if tol <= 0.
EquivalenceReport verify_equivalence(std::size_t n, std::size_t m, double alpha,
                                     std::uint64_t seed, double tol,
                                     KeyNorms norms = KeyNorms::kUnit);

/// Seeded probe as used by verify_equivalence.
FilterProbe random_probe(std::size_t n, std::size_t m, double alpha, std::uint64_t seed,
                         KeyNorms norms = KeyNorms::kUnit);

}  // namespace tokpool
