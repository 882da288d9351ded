// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tokpool/config.hpp"
#include "tokpool/matrix.hpp"
#include "tokpool/transformer.hpp"

namespace tokpool::io {

// TPM1 layout, all little-endian:
//   bytes 0..3   "TPM1"
//   bytes 4..7   rows (u32)
//   bytes 8..11  cols (u32)
//   bytes 12..   rows*cols IEEE-754 binary32, row-major
// Values are widened to double on load and rounded to binary32 on save.

std::vector<std::uint8_t> encode_tpm(const Matrix& m);
Matrix decode_tpm(std::span<const std::uint8_t> bytes);

/// Comma-separated rows, no header. Written with shortest round-trip
/// formatting of the double values.
Matrix parse_csv(std::string_view text);
std::string format_csv(const Matrix& m);

/// Dispatches on extension: ".tpm" or ".csv". Errors are DataError with a
/// byte offset (TPM1) or line/column (CSV).
Matrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Matrix& m);

/// A per-token vector stored as an N x 1 or 1 x N matrix.
std::vector<double> read_vector(const std::filesystem::path& path);

/// H attention maps stored as one (H*N) x N matrix.
AttentionMaps read_attention_maps(const std::filesystem::path& path, std::size_t heads);
void write_attention_maps(const std::filesystem::path& path, const AttentionMaps& maps);
AttentionMaps split_attention_maps(const Matrix& stacked, std::size_t heads);

/// JSON object with keys layers, dim, heads, tokens and optional mlp_ratio,
/// schedule, alpha, mode. Unknown keys and violated constraints raise
/// DataError naming the key.
ModelConfig parse_config(std::string_view json_text);
ModelConfig read_config(const std::filesystem::path& path);
std::string config_to_json(const ModelConfig& config);

/// Bare JSON array of nonnegative integers.
std::vector<std::int64_t> parse_schedule(std::string_view json_text);
std::vector<std::int64_t> read_schedule(const std::filesystem::path& path);

// Weights directory layout, block index l from 0:
//   block<l>_wq<h>.tpm, block<l>_wk<h>.tpm, block<l>_wv<h>.tpm  (M x d)
//   block<l>_wo.tpm (M x M), block<l>_mlp1.tpm (M x rM), block<l>_mlp2.tpm (rM x M)
// alpha is taken from the config.
std::vector<BlockWeights> read_weights_dir(const std::filesystem::path& dir,
                                           const ModelConfig& config);
void write_weights_dir(const std::filesystem::path& dir, const std::vector<BlockWeights>& blocks);

std::string read_text(const std::filesystem::path& path);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace tokpool::io
