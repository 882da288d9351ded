// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "tokpool/error.hpp"

namespace tokpool::io {
namespace {

using nlohmann::json;

constexpr std::uint8_t kMagic[4] = {'T', 'P', 'M', '1'};
constexpr std::size_t kHeaderBytes = 12;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[offset + b]) << (8 * b);
  return v;
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

std::size_t require_uint(const json& obj, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) {
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::size_t>();
    throw DataError(std::string("config key '") + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::vector<std::int64_t> schedule_from_json(const json& v, const std::string& where) {
  if (!v.is_array()) throw DataError(where + " must be an array of integers");
  std::vector<std::int64_t> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& e = v[i];
    if (!e.is_number_integer() || e.get<std::int64_t>() < 0) {
      throw DataError(where + " entry " + std::to_string(i) + " is not a nonnegative integer");
    }
    out.push_back(e.get<std::int64_t>());
  }
  return out;
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string(what) + ": invalid JSON at byte " + std::to_string(e.byte) + ": " +
                    e.what());
  }
}

std::string weight_name(std::size_t block, std::string_view part) {
  return "block" + std::to_string(block) + "_" + std::string(part) + ".tpm";
}

Matrix read_shaped(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  Matrix m = read_matrix(path);
  if (m.rows() != rows || m.cols() != cols) {
    throw DataError(path.string() + ": expected " + std::to_string(rows) + "x" +
                    std::to_string(cols) + ", found " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
  }
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_tpm(const Matrix& m) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
      m.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw DataError("matrix too large for TPM1");
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.reserve(kHeaderBytes + 4 * m.data().size());
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    const auto f = static_cast<float>(m.data()[i]);
    if (!std::isfinite(f)) {
      throw DataError("value " + std::to_string(i) + " is not representable as a finite float32");
    }
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

Matrix decode_tpm(std::span<const std::uint8_t> bytes) {
  for (std::size_t i = 0; i < std::min<std::size_t>(4, bytes.size()); ++i) {
    if (bytes[i] != kMagic[i]) throw DataError("offset 0: bad magic, expected \"TPM1\"");
  }
  if (bytes.size() < kHeaderBytes) {
    throw DataError("offset " + std::to_string(bytes.size()) + ": truncated TPM1 header");
  }
  const std::uint64_t rows = get_u32(bytes, 4);
  const std::uint64_t cols = get_u32(bytes, 8);
  const std::uint64_t expected = kHeaderBytes + 4 * rows * cols;
  if (bytes.size() != expected) {
    throw DataError("offset " + std::to_string(std::min<std::uint64_t>(bytes.size(), expected)) +
                    ": payload length mismatch, file has " + std::to_string(bytes.size()) +
                    " bytes, header implies " + std::to_string(expected));
  }
  std::vector<double> data(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t offset = kHeaderBytes + 4 * i;
    const float f = std::bit_cast<float>(get_u32(bytes, offset));
    if (!std::isfinite(f)) {
      throw DataError("offset " + std::to_string(offset) + ": NaN or Inf in payload");
    }
    data[i] = f;
  }
  return Matrix(rows, cols, std::move(data));
}

Matrix parse_csv(std::string_view text) {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::size_t count = 0;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.size() - start
                                                                                 : comma - start);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw DataError("line " + std::to_string(line_no) + ", column " +
                        std::to_string(count + 1) + ": non-numeric cell '" + std::string(cell) +
                        "'");
      }
      if (!std::isfinite(v)) {
        throw DataError("line " + std::to_string(line_no) + ", column " +
                        std::to_string(count + 1) + ": NaN or Inf");
      }
      data.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                      " cells, found " + std::to_string(count));
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

std::string format_csv(const Matrix& m) {
  std::string out;
  char buf[64];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out.push_back(',');
      const auto res = std::to_chars(buf, buf + sizeof buf, m(r, c));
      out.append(buf, res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  return {text.begin(), text.end()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

Matrix read_matrix(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  try {
    if (ext == ".tpm") return decode_tpm(read_bytes(path));
    if (ext == ".csv") return parse_csv(read_text(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  throw UsageError(path.string() + ": unsupported matrix extension (use .tpm or .csv)");
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  const std::string ext = lower_extension(path);
  if (ext == ".tpm") {
    write_bytes(path, encode_tpm(m));
  } else if (ext == ".csv") {
    if (!m.all_finite()) throw DataError(path.string() + ": matrix contains NaN or Inf");
    write_text(path, format_csv(m));
  } else {
    throw UsageError(path.string() + ": unsupported matrix extension (use .tpm or .csv)");
  }
}

std::vector<double> read_vector(const std::filesystem::path& path) {
  const Matrix m = read_matrix(path);
  if (m.cols() != 1 && m.rows() != 1) {
    throw DataError(path.string() + ": expected an N x 1 or 1 x N matrix");
  }
  return {m.data().begin(), m.data().end()};
}

AttentionMaps split_attention_maps(const Matrix& stacked, std::size_t heads) {
  if (heads == 0) throw UsageError("number of heads must be >= 1");
  const std::size_t n = stacked.cols();
  if (stacked.rows() != heads * n) {
    throw DataError("attention file is " + std::to_string(stacked.rows()) + "x" +
                    std::to_string(n) + ", expected " + std::to_string(heads * n) + "x" +
                    std::to_string(n) + " for " + std::to_string(heads) + " heads");
  }
  AttentionMaps maps;
  for (std::size_t h = 0; h < heads; ++h) maps.heads.push_back(stacked.slice_rows(h * n, (h + 1) * n));
  return maps;
}

AttentionMaps read_attention_maps(const std::filesystem::path& path, std::size_t heads) {
  try {
    return split_attention_maps(read_matrix(path), heads);
  } catch (const DataError& e) {
    // read_matrix errors already name the path; shape errors do not.
    const std::string what = e.what();
    if (what.starts_with(path.string())) throw;
    throw DataError(path.string() + ": " + what);
  }
}

void write_attention_maps(const std::filesystem::path& path, const AttentionMaps& maps) {
  Matrix stacked;
  for (const auto& h : maps.heads) stacked = vstack(stacked, h);
  write_matrix(path, stacked);
}

ModelConfig parse_config(std::string_view json_text) {
  const json root = parse_json(json_text, "config");
  if (!root.is_object()) throw DataError("config must be a JSON object");
  static const char* const kKnown[] = {"layers", "dim",      "heads", "mlp_ratio",
                                       "tokens", "schedule", "alpha", "mode"};
  for (const auto& [key, _] : root.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) throw DataError("config: unknown key '" + key + "'");
  }
  for (const char* required : {"layers", "dim", "heads", "tokens"}) {
    if (!root.contains(required)) {
      throw DataError(std::string("config: missing required key '") + required + "'");
    }
  }

  ModelConfig c;
  c.layers = require_uint(root, "layers");
  c.dim = require_uint(root, "dim");
  c.heads = require_uint(root, "heads");
  c.tokens = require_uint(root, "tokens");
  if (root.contains("mlp_ratio")) c.mlp_ratio = require_uint(root, "mlp_ratio");
  if (root.contains("schedule")) c.schedule = schedule_from_json(root["schedule"], "config key 'schedule'");
  if (root.contains("alpha")) {
    if (!root["alpha"].is_number()) throw DataError("config key 'alpha' must be a number");
    c.alpha = root["alpha"].get<double>();
  }
  if (root.contains("mode")) {
    if (!root["mode"].is_string()) throw DataError("config key 'mode' must be a string");
    try {
      c.mode = parse_attention_mode(root["mode"].get<std::string>());
    } catch (const UsageError& e) {
      throw DataError(std::string("config key 'mode': ") + e.what());
    }
  }
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
  return c;
}

ModelConfig read_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_text(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string config_to_json(const ModelConfig& config) {
  json j = {{"layers", config.layers},
            {"dim", config.dim},
            {"heads", config.heads},
            {"mlp_ratio", config.mlp_ratio},
            {"tokens", config.tokens}};
  if (config.schedule) j["schedule"] = *config.schedule;
  if (config.alpha) j["alpha"] = *config.alpha;
  if (config.mode) j["mode"] = std::string(to_string(*config.mode));
  return j.dump();
}

std::vector<std::int64_t> parse_schedule(std::string_view json_text) {
  return schedule_from_json(parse_json(json_text, "schedule"), "schedule");
}

std::vector<std::int64_t> read_schedule(const std::filesystem::path& path) {
  try {
    return parse_schedule(read_text(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<BlockWeights> read_weights_dir(const std::filesystem::path& dir,
                                           const ModelConfig& config) {
  config.validate();
  const std::size_t m = config.dim;
  const std::size_t d = config.head_dim();
  const std::size_t hidden = config.mlp_ratio * m;
  std::optional<double> alpha = config.alpha;
  if (!alpha && config.mode == AttentionMode::kNormalizedAlpha) alpha = 1.0;

  std::vector<BlockWeights> blocks(config.layers);
  for (std::size_t l = 0; l < config.layers; ++l) {
    auto& b = blocks[l];
    for (std::size_t h = 0; h < config.heads; ++h) {
      b.wq.push_back(read_shaped(dir / weight_name(l, "wq" + std::to_string(h)), m, d));
      b.wk.push_back(read_shaped(dir / weight_name(l, "wk" + std::to_string(h)), m, d));
      b.wv.push_back(read_shaped(dir / weight_name(l, "wv" + std::to_string(h)), m, d));
    }
    b.wo = read_shaped(dir / weight_name(l, "wo"), m, m);
    b.mlp1 = read_shaped(dir / weight_name(l, "mlp1"), m, hidden);
    b.mlp2 = read_shaped(dir / weight_name(l, "mlp2"), hidden, m);
    b.alpha = alpha;
  }
  return blocks;
}

void write_weights_dir(const std::filesystem::path& dir, const std::vector<BlockWeights>& blocks) {
  std::filesystem::create_directories(dir);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    for (std::size_t h = 0; h < b.heads(); ++h) {
      write_matrix(dir / weight_name(l, "wq" + std::to_string(h)), b.wq[h]);
      write_matrix(dir / weight_name(l, "wk" + std::to_string(h)), b.wk[h]);
      write_matrix(dir / weight_name(l, "wv" + std::to_string(h)), b.wv[h]);
    }
    write_matrix(dir / weight_name(l, "wo"), b.wo);
    write_matrix(dir / weight_name(l, "mlp1"), b.mlp1);
    write_matrix(dir / weight_name(l, "mlp2"), b.mlp2);
  }
}

}  // namespace tokpool::io
