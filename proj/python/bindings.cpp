// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tokpool/costmodel.hpp"
#include "tokpool/error.hpp"
#include "tokpool/filterlab.hpp"
#include "tokpool/io.hpp"
#include "tokpool/numerics.hpp"
#include "tokpool/pooling.hpp"
#include "tokpool/scoring.hpp"

namespace py = pybind11;
using namespace tokpool;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

std::optional<std::vector<double>> to_vector(const std::optional<Array>& a) {
  if (!a) return std::nullopt;
  if (a->ndim() != 1) throw py::value_error("expected a 1-D array");
  return std::vector<double>(a->data(), a->data() + a->shape(0));
}

py::dict cluster_dict(const ClusterResult& cr) {
  py::dict d;
  d["first_clustered"] = cr.first_clustered;
  d["assignment"] = cr.assignment;
  d["centers"] = to_array(cr.centers);
  d["medoid_indices"] = cr.medoid_indices ? py::cast(*cr.medoid_indices) : py::none();
  d["iterations"] = cr.iterations;
  d["loss"] = cr.loss;
  d["loss_history"] = cr.loss_history;
  d["counts"] = cr.counts;
  return d;
}

py::dict flops_dict(const BlockFlops& f) {
  py::dict d;
  d["attention"] = f.attention;
  d["qkv"] = f.qkv;
  d["oproj"] = f.oproj;
  d["mlp"] = f.mlp;
  d["total"] = f.total();
  return d;
}

ModelConfig make_config(std::size_t layers, std::size_t dim, std::size_t heads,
                        std::size_t tokens, std::size_t mlp_ratio,
                        std::optional<std::vector<std::int64_t>> schedule) {
  ModelConfig c;
  c.layers = layers;
  c.dim = dim;
  c.heads = heads;
  c.tokens = tokens;
  c.mlp_ratio = mlp_ratio;
  c.schedule = std::move(schedule);
  return c;
}

}  // namespace

PYBIND11_MODULE(_tokpool, m) {
  m.doc() = "Token pooling, significance scores, flop accounting and filter checks.";

  static py::exception<UsageError> usage_error(m, "UsageError", PyExc_ValueError);
  static py::exception<DataError> data_error(m, "DataError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UsageError& e) {
      py::set_error(usage_error, e.what());
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    }
  });

  m.def("softmax_rows", [](const Array& x) { return to_array(softmax_rows(to_matrix(x))); },
        py::arg("x"));
  m.def("pairwise_sq_dists",
        [](const Array& a, const Array& b) {
          return to_array(pairwise_sq_dists(to_matrix(a), to_matrix(b)));
        },
        py::arg("a"), py::arg("b"));

  m.def("chamfer_loss",
        [](const Array& f, const Array& fhat, const std::optional<Array>& weights) {
          const auto w = to_vector(weights);
          return w ? chamfer_loss(to_matrix(f), to_matrix(fhat), std::span<const double>(*w))
                   : chamfer_loss(to_matrix(f), to_matrix(fhat));
        },
        py::arg("f"), py::arg("fhat"), py::arg("weights") = py::none());

  m.def("token_pool",
        [](const Array& features, std::size_t k, const std::string& method,
           const std::optional<Array>& weights, const std::optional<Array>& counts,
           const std::string& init, std::uint64_t seed, std::size_t max_iters, bool protect_first,
           bool emit_counts) {
          TokenSet f{to_matrix(features)};
          f.weights = to_vector(weights);
          f.counts = to_vector(counts);
          PoolSpec spec;
          spec.method = parse_pool_method(method);
          spec.k = k;
          spec.init = parse_cluster_init(init);
          spec.seed = seed;
          spec.max_iters = max_iters;
          spec.protect_first = protect_first;
          spec.emit_counts = emit_counts;
          const PoolResult r = token_pool(f, spec);
          py::object out_counts = r.tokens.counts ? py::cast(*r.tokens.counts) : py::none();
          return py::make_tuple(to_array(r.tokens.features), cluster_dict(r.clusters), out_counts);
        },
        py::arg("features"), py::arg("k"), py::arg("method") = "wkmedoids",
        py::arg("weights") = py::none(), py::arg("counts") = py::none(),
        py::arg("init") = "topk", py::arg("seed") = 0, py::arg("max_iters") = 5,
        py::arg("protect_first") = true, py::arg("emit_counts") = false,
        "Pool tokens; returns (pooled features, cluster result dict, counts or None).");

  m.def("significance",
        [](const Array& stacked, std::size_t heads) {
          return significance(io::split_attention_maps(to_matrix(stacked), heads)).values;
        },
        py::arg("stacked"), py::arg("heads"),
        "Scores from an (H*N) x N array of stacked row-stochastic attention maps.");

  m.def("block_flops",
        [](std::size_t n, std::size_t dim, std::size_t mlp_ratio) {
          return flops_dict(block_flops(n, make_config(1, dim, 1, n, mlp_ratio, std::nullopt)));
        },
        py::arg("n"), py::arg("dim"), py::arg("mlp_ratio") = 4);

  m.def("model_flops",
        [](std::size_t layers, std::size_t dim, std::size_t heads, std::size_t tokens,
           std::size_t mlp_ratio, std::optional<std::vector<std::int64_t>> schedule,
           std::optional<std::string> clustering, std::size_t iters) {
          std::optional<ClusteringCost> cost;
          if (clustering) cost = ClusteringCost{parse_clustering_algo(*clustering), iters};
          const FlopReport r =
              model_flops(make_config(layers, dim, heads, tokens, mlp_ratio, std::move(schedule)), cost);
          py::dict d = flops_dict(r.totals);
          d["clustering"] = r.clustering;
          d["grand_total"] = r.grand_total;
          std::vector<std::size_t> tokens_per_layer;
          for (const auto& l : r.per_layer) tokens_per_layer.push_back(l.tokens);
          d["tokens"] = tokens_per_layer;
          return d;
        },
        py::arg("layers"), py::arg("dim"), py::arg("heads"), py::arg("tokens"),
        py::arg("mlp_ratio") = 4, py::arg("schedule") = py::none(),
        py::arg("clustering") = py::none(), py::arg("iters") = 5);

  m.def("verify_equivalence",
        [](std::size_t n, std::size_t dim, double alpha, std::uint64_t seed, double tol,
           bool unnormalized_keys) {
          const auto r = verify_equivalence(n, dim, alpha, seed, tol,
                                            unnormalized_keys ? KeyNorms::kRandom : KeyNorms::kUnit);
          return py::make_tuple(r.max_abs_dev, r.pass);
        },
        py::arg("n"), py::arg("m"), py::arg("alpha"), py::arg("seed"), py::arg("tol") = 1e-9,
        py::arg("unnormalized_keys") = false);

  m.def("read_matrix", [](const std::filesystem::path& p) { return to_array(io::read_matrix(p)); },
        py::arg("path"));
  m.def("write_matrix",
        [](const std::filesystem::path& p, const Array& a) { io::write_matrix(p, to_matrix(a)); },
        py::arg("path"), py::arg("matrix"));
}
