// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "tokpool/transformer.hpp"

namespace tokpool {

/// Per-token significance: total attention a token receives, summed over
/// heads and query rows. Entries are nonnegative and sum to H * N.
struct ScoreVector {
  std::vector<double> values;
};

/// Column sums of the attention maps accumulated over heads. Every row of
/// every map must sum to 1 within 1e-6, otherwise DataError.
ScoreVector significance(const AttentionMaps& maps);

}  // namespace tokpool
