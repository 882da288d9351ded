// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/cli.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tokpool/costmodel.hpp"
#include "tokpool/error.hpp"
#include "tokpool/filterlab.hpp"
#include "tokpool/io.hpp"
#include "tokpool/numerics.hpp"
#include "tokpool/pipeline.hpp"
#include "tokpool/pooling.hpp"
#include "tokpool/scoring.hpp"

namespace tokpool::cli {
namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

struct CostArgs {
  std::string config;
  std::string clustering;
  std::size_t iters = 5;
  std::string format = "table";
};

struct PoolArgs {
  std::string input;
  std::size_t k = 0;
  std::string method;
  std::string weights;
  std::string scores_from;
  std::size_t heads = 0;
  std::string init = "topk";
  std::uint64_t seed = 0;
  std::size_t iters = 5;
  bool no_protect_first = false;
  std::string grid;
  std::string out;
  std::string assignments;
  std::string counts_out;
};

struct ScoreArgs {
  std::string attention;
  std::size_t heads = 0;
  std::string out;
};

struct ForwardArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string weights_dir;
  std::string input;
  std::string schedule;
  std::string pool_method = "wkmedoids";
  std::string init = "topk";
  std::size_t iters = 5;
  std::uint64_t pool_seed = 0;
  std::string out;
  std::string trace;
};

struct VerifyArgs {
  std::size_t n = 0;
  std::size_t m = 0;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  double tol = 1e-9;
  bool unnormalized_keys = false;
};

std::string lower_ext(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

ordered_json flops_json(const BlockFlops& b) {
  return {{"attention", b.attention}, {"qkv", b.qkv}, {"oproj", b.oproj}, {"mlp", b.mlp}};
}

int do_cost(const CostArgs& a, std::ostream& out) {
  const ModelConfig config = io::read_config(a.config);
  std::optional<ClusteringCost> clustering;
  if (!a.clustering.empty()) clustering = ClusteringCost{parse_clustering_algo(a.clustering), a.iters};
  const FlopReport report = model_flops(config, clustering);
  const FlopShares shares = breakdown_fractions(report);

  if (a.format == "json") {
    ordered_json j;
    j["config"] = ordered_json::parse(io::config_to_json(config));
    j["clustering"] = clustering ? ordered_json(std::string(to_string(clustering->algo)))
                                 : ordered_json(nullptr);
    if (clustering) j["clustering_iters"] = clustering->iters;
    ordered_json layers = ordered_json::array();
    for (std::size_t l = 0; l < report.per_layer.size(); ++l) {
      const auto& lf = report.per_layer[l];
      ordered_json row = {{"layer", l}, {"tokens", lf.tokens}};
      row.update(flops_json(lf.block));
      row["clustering"] = lf.clustering;
      row["total"] = lf.total();
      layers.push_back(std::move(row));
    }
    j["per_layer"] = std::move(layers);
    ordered_json totals = flops_json(report.totals);
    totals["clustering"] = report.clustering;
    j["totals"] = std::move(totals);
    j["grand_total"] = report.grand_total;
    j["shares"] = {{"attention", shares.attention}, {"qkv", shares.qkv},
                   {"oproj", shares.oproj},         {"mlp", shares.mlp},
                   {"clustering", shares.clustering}};
    out << j.dump(2) << "\n";
  } else if (a.format == "csv") {
    out << "layer,tokens,attention,qkv,oproj,mlp,clustering,total\n";
    for (std::size_t l = 0; l < report.per_layer.size(); ++l) {
      const auto& lf = report.per_layer[l];
      out << l << ',' << lf.tokens << ',' << lf.block.attention << ',' << lf.block.qkv << ','
          << lf.block.oproj << ',' << lf.block.mlp << ',' << lf.clustering << ',' << lf.total()
          << "\n";
    }
    out << "total,," << report.totals.attention << ',' << report.totals.qkv << ','
        << report.totals.oproj << ',' << report.totals.mlp << ',' << report.clustering << ','
        << report.grand_total << "\n";
  } else if (a.format == "table") {
    auto g = [](std::uint64_t v) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(4) << static_cast<double>(v) / 1e9;
      return s.str();
    };
    out << std::left << std::setw(6) << "layer" << std::right << std::setw(8) << "tokens"
        << std::setw(12) << "attention" << std::setw(12) << "qkv" << std::setw(12) << "oproj"
        << std::setw(12) << "mlp" << std::setw(12) << "clustering" << std::setw(12) << "total"
        << "\n";
    for (std::size_t l = 0; l < report.per_layer.size(); ++l) {
      const auto& lf = report.per_layer[l];
      out << std::left << std::setw(6) << l << std::right << std::setw(8) << lf.tokens
          << std::setw(12) << g(lf.block.attention) << std::setw(12) << g(lf.block.qkv)
          << std::setw(12) << g(lf.block.oproj) << std::setw(12) << g(lf.block.mlp)
          << std::setw(12) << g(lf.clustering) << std::setw(12) << g(lf.total()) << "\n";
    }
    out << std::left << std::setw(14) << "total" << std::right << std::setw(12)
        << g(report.totals.attention) << std::setw(12) << g(report.totals.qkv) << std::setw(12)
        << g(report.totals.oproj) << std::setw(12) << g(report.totals.mlp) << std::setw(12)
        << g(report.clustering) << std::setw(12) << g(report.grand_total) << "\n";
    out << std::fixed << std::setprecision(2) << "shares: attention "
        << 100 * shares.attention << "%, qkv " << 100 * shares.qkv << "%, oproj "
        << 100 * shares.oproj << "%, mlp " << 100 * shares.mlp << "%, clustering "
        << 100 * shares.clustering << "%  (Gflops, 1 flop = 1 multiply-accumulate)\n";
  } else {
    throw UsageError("unknown format '" + a.format + "' (table, csv or json)");
  }
  return kOk;
}

GridShape parse_grid(const std::string& text) {
  const auto x = text.find('x');
  GridShape g;
  auto parse = [&](std::string_view s, std::size_t& v) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size() && !s.empty();
  };
  if (x == std::string::npos || !parse(std::string_view(text).substr(0, x), g.height) ||
      !parse(std::string_view(text).substr(x + 1), g.width)) {
    throw UsageError("--grid expects HxW, got '" + text + "'");
  }
  return g;
}

ordered_json cluster_json(const PoolSpec& spec, const ClusterResult& cr) {
  ordered_json j;
  j["method"] = std::string(to_string(spec.method));
  j["k"] = spec.k;
  j["first_clustered"] = cr.first_clustered;
  j["assignment"] = cr.assignment;
  j["medoid_indices"] = cr.medoid_indices ? ordered_json(*cr.medoid_indices) : ordered_json(nullptr);
  j["iterations"] = cr.iterations;
  j["loss"] = cr.loss;
  j["loss_history"] = cr.loss_history;
  j["counts"] = cr.counts;
  return j;
}

int do_pool(const PoolArgs& a, std::ostream& out) {
  if (!a.weights.empty() && !a.scores_from.empty()) {
    throw UsageError("--weights and --scores-from are mutually exclusive");
  }
  if (!a.scores_from.empty() && a.heads == 0) throw UsageError("--scores-from requires --heads");
  TokenSet f;
  f.features = io::read_matrix(a.input);
  if (!a.weights.empty()) f.weights = io::read_vector(a.weights);
  if (!a.scores_from.empty()) {
    f.weights = significance(io::read_attention_maps(a.scores_from, a.heads)).values;
  }
  if (f.weights && f.weights->size() != f.size()) {
    throw DataError("weights have " + std::to_string(f.weights->size()) + " entries for " +
                    std::to_string(f.size()) + " tokens");
  }
  if (!a.grid.empty()) f.grid = parse_grid(a.grid);

  PoolSpec spec;
  spec.method = parse_pool_method(a.method);
  spec.k = a.k;
  spec.max_iters = a.iters;
  spec.init = parse_cluster_init(a.init);
  spec.seed = a.seed;
  spec.protect_first = !a.no_protect_first;
  spec.emit_counts = !a.counts_out.empty();

  const PoolResult r = token_pool(f, spec);
  io::write_matrix(a.out, r.tokens.features);
  if (!a.assignments.empty()) io::write_text(a.assignments, cluster_json(spec, r.clusters).dump(2) + "\n");
  if (!a.counts_out.empty()) {
    const auto& c = r.tokens.counts ? *r.tokens.counts : std::vector<double>(r.tokens.size(), 1.0);
    io::write_matrix(a.counts_out, Matrix(c.size(), 1, c));
  }
  out << "pooled " << f.size() << " -> " << r.tokens.size() << " tokens, method "
      << to_string(spec.method) << ", iterations " << r.clusters.iterations << ", loss "
      << ordered_json(r.clusters.loss).dump() << "\n";
  return kOk;
}

int do_score(const ScoreArgs& a, std::ostream& out) {
  const ScoreVector s = significance(io::read_attention_maps(a.attention, a.heads));
  const Matrix col(s.values.size(), 1, s.values);
  if (a.out.empty()) {
    out << io::format_csv(col);
  } else {
    io::write_matrix(a.out, col);
    double total = 0.0;
    for (double v : s.values) total += v;
    out << "scores for " << s.values.size() << " tokens over " << a.heads << " heads, sum "
        << ordered_json(total).dump() << "\n";
  }
  return kOk;
}

void write_trace(const std::string& path, const std::vector<LayerTrace>& trace) {
  if (lower_ext(path) == ".csv") {
    std::ostringstream s;
    s << "layer,tokens_in,tokens_out,target,pooled,loss,iterations\n";
    for (const auto& t : trace) {
      s << t.layer << ',' << t.tokens_in << ',' << t.tokens_out << ','
        << (t.target ? std::to_string(*t.target) : "") << ',' << (t.pooled ? 1 : 0) << ','
        << (t.loss ? ordered_json(*t.loss).dump() : "") << ',' << t.iterations << "\n";
    }
    io::write_text(path, s.str());
    return;
  }
  ordered_json layers = ordered_json::array();
  for (const auto& t : trace) {
    layers.push_back({{"layer", t.layer},
                      {"tokens_in", t.tokens_in},
                      {"tokens_out", t.tokens_out},
                      {"target", t.target ? ordered_json(*t.target) : ordered_json(nullptr)},
                      {"pooled", t.pooled},
                      {"loss", t.loss ? ordered_json(*t.loss) : ordered_json(nullptr)},
                      {"iterations", t.iterations}});
  }
  io::write_text(path, ordered_json{{"layers", layers}}.dump(2) + "\n");
}

int do_forward(const ForwardArgs& a, std::ostream& out) {
  ModelConfig config = io::read_config(a.config);
  if (!a.schedule.empty()) {
    config.schedule = io::read_schedule(a.schedule);
    try {
      config.validate();
    } catch (const UsageError& e) {
      throw DataError(a.schedule + ": " + e.what());
    }
  }
  TokenSet input;
  input.features = io::read_matrix(a.input);
  if (input.size() != config.tokens) {
    throw DataError(a.input + ": has " + std::to_string(input.size()) + " tokens, config expects " +
                    std::to_string(config.tokens));
  }
  const auto blocks = a.weights_dir.empty() ? synth_weights(config, a.seed)
                                            : io::read_weights_dir(a.weights_dir, config);
  ForwardOptions options;
  options.pool_method = parse_pool_method(a.pool_method);
  options.init = parse_cluster_init(a.init);
  options.max_iters = a.iters;
  options.seed = a.pool_seed;
  if (options.max_iters == 0) throw UsageError("--iters must be >= 1");

  const ForwardResult r = run_forward(input, blocks, config, options);
  io::write_matrix(a.out, r.output.features);
  if (!a.trace.empty()) write_trace(a.trace, r.trace);
  out << "forward: " << config.layers << " blocks, tokens";
  out << ' ' << input.size();
  for (const auto& t : r.trace) out << ' ' << t.tokens_out;
  out << "\n";
  return kOk;
}

int do_verify(const VerifyArgs& a, std::ostream& out) {
  if (a.n == 0 || a.m == 0) throw UsageError("--n and --m must be >= 1");
  const auto rep = verify_equivalence(a.n, a.m, a.alpha, a.seed, a.tol,
                                      a.unnormalized_keys ? KeyNorms::kRandom : KeyNorms::kUnit);
  out << "max_abs_dev " << ordered_json(rep.max_abs_dev).dump() << "\n";
  out << "tolerance " << ordered_json(a.tol).dump() << "\n";
  out << (rep.pass ? "PASS" : "FAIL") << "\n";
  return rep.pass ? kOk : kVerificationFailed;
}

void apply_thread_env() {
  const char* env = std::getenv("TOKPOOL_THREADS");
  if (env == nullptr || *env == '\0') return;
  std::size_t threads = 0;
  const std::string_view s(env);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), threads);
  if (ec != std::errc() || p != s.data() + s.size() || threads == 0) {
    throw UsageError("TOKPOOL_THREADS must be a positive integer, got '" + std::string(s) + "'");
  }
  set_thread_cap(threads);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Token Pooling toolkit: flop accounting, token pooling, significance scores, "
               "forward passes and attention/filter verification",
               "tokpool"};
  app.require_subcommand(1, 1);

  CostArgs cost;
  auto* cost_cmd = app.add_subcommand("cost", "Flop breakdown of a model configuration");
  cost_cmd->add_option("--config", cost.config, "Model config JSON")->required();
  cost_cmd->add_option("--clustering", cost.clustering, "Add clustering overhead: kmeans|kmedoids");
  cost_cmd->add_option("--iters", cost.iters, "Clustering iterations T")->capture_default_str();
  cost_cmd->add_option("--format", cost.format, "table|csv|json")->capture_default_str();

  PoolArgs pool;
  auto* pool_cmd = app.add_subcommand("pool", "Downsample a token matrix");
  pool_cmd->add_option("--input", pool.input, "Token matrix (.tpm or .csv)")->required();
  pool_cmd->add_option("--k", pool.k, "Target token count, classification token excluded")->required();
  pool_cmd->add_option("--method", pool.method,
                       "kmeans|wkmeans|kmedoids|wkmedoids|random|importance|grid")
      ->required();
  pool_cmd->add_option("--weights", pool.weights, "Per-token weights (N x 1)");
  pool_cmd->add_option("--scores-from", pool.scores_from, "Attention maps; weights = significance");
  pool_cmd->add_option("--heads", pool.heads, "Heads stacked in --scores-from");
  pool_cmd->add_option("--init", pool.init, "topk|random")->capture_default_str();
  pool_cmd->add_option("--seed", pool.seed, "Seed for random init / selection")->capture_default_str();
  pool_cmd->add_option("--iters", pool.iters, "Maximum clustering iterations")->capture_default_str();
  pool_cmd->add_flag("--no-protect-first", pool.no_protect_first, "Pool row 0 like any other token");
  pool_cmd->add_option("--grid", pool.grid, "Patch grid HxW (grid method)");
  pool_cmd->add_option("--out", pool.out, "Pooled token matrix")->required();
  pool_cmd->add_option("--assignments", pool.assignments, "Cluster result JSON");
  pool_cmd->add_option("--counts-out", pool.counts_out, "Per-output carry counts (N x 1)");

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Significance scores from attention maps");
  score_cmd->add_option("--attention", score.attention, "(H*N) x N attention maps")->required();
  score_cmd->add_option("--heads", score.heads, "Number of heads H")->required();
  score_cmd->add_option("--out", score.out, "Score vector (N x 1); CSV to stdout when omitted");

  ForwardArgs fwd;
  auto* fwd_cmd = app.add_subcommand("forward", "Run transformer blocks with token pooling");
  fwd_cmd->add_option("--config", fwd.config, "Model config JSON")->required();
  auto* seed_opt = fwd_cmd->add_option("--seed", fwd.seed, "Seed for synthetic weights");
  auto* dir_opt = fwd_cmd->add_option("--weights-dir", fwd.weights_dir, "Directory of block weights");
  seed_opt->excludes(dir_opt);
  fwd_cmd->add_option("--input", fwd.input, "Input tokens")->required();
  fwd_cmd->add_option("--schedule", fwd.schedule, "Schedule JSON array overriding the config");
  fwd_cmd->add_option("--pool-method", fwd.pool_method, "Pooling method between blocks")
      ->capture_default_str();
  fwd_cmd->add_option("--init", fwd.init, "topk|random")->capture_default_str();
  fwd_cmd->add_option("--iters", fwd.iters, "Maximum clustering iterations")->capture_default_str();
  fwd_cmd->add_option("--pool-seed", fwd.pool_seed, "Seed for random pooling choices")
      ->capture_default_str();
  fwd_cmd->add_option("--out", fwd.out, "Output tokens")->required();
  fwd_cmd->add_option("--trace", fwd.trace, "Per-layer trace (.json or .csv)");

  VerifyArgs verify;
  auto* verify_cmd =
      app.add_subcommand("verify-filter", "Check softmax attention against Gaussian filtering");
  verify_cmd->add_option("--n", verify.n, "Number of tokens")->required();
  verify_cmd->add_option("--m", verify.m, "Feature width")->required();
  verify_cmd->add_option("--alpha", verify.alpha, "Attention sharpness")->required();
  verify_cmd->add_option("--seed", verify.seed, "Probe seed")->required();
  verify_cmd->add_option("--tol", verify.tol, "Maximum allowed deviation")->capture_default_str();
  verify_cmd->add_flag("--unnormalized-keys", verify.unnormalized_keys,
                       "Draw key norms from [0.5, 2] (counterexample)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    apply_thread_env();
    if (*cost_cmd) return do_cost(cost, out);
    if (*pool_cmd) return do_pool(pool, out);
    if (*score_cmd) return do_score(score, out);
    if (*fwd_cmd) return do_forward(fwd, out);
    if (*verify_cmd) return do_verify(verify, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace tokpool::cli
