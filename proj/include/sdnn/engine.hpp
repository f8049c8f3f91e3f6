#pragma once

// Timed challenge execution.
//
// infer() times exactly the layer loop plus category extraction. Loading,
// generation and verification happen outside the timer, which is enforced by
// infer() only accepting in-memory inputs.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdnn/error.hpp"
#include "sdnn/kernels.hpp"
#include "sdnn/radixnet.hpp"
#include "sdnn/sparse_matrix.hpp"

namespace sdnn {

enum class Representation { dense, sparse };

inline const char* to_string(Representation r) {
  return r == Representation::dense ? "dense" : "sparse";
}

inline Representation parse_representation(const std::string& s) {
  if (s == "dense") return Representation::dense;
  if (s == "sparse") return Representation::sparse;
  throw InvariantError("representation: expected 'dense' or 'sparse', got '" + s + "'");
}

/// 1-based ids of rows holding any entry > 0.
template <typename T>
std::vector<std::size_t> extract_categories(const DenseBatch<T>& y) {
  std::vector<std::size_t> cats;
  for (std::size_t i = 0; i < y.n_rows(); ++i) {
    auto r = y.row(i);
    if (std::any_of(r.begin(), r.end(), [](T v) { return v > T{0}; })) cats.push_back(i + 1);
  }
  return cats;
}

template <typename T>
std::vector<std::size_t> extract_categories(const SparseMatrix<T>& y) {
  std::vector<std::size_t> cats;
  for (std::size_t i = 0; i < y.n_rows(); ++i) {
    auto v = y.row_values(i);
    if (std::any_of(v.begin(), v.end(), [](T x) { return x > T{0}; })) cats.push_back(i + 1);
  }
  return cats;
}

template <typename Batch>
struct InferenceOutput {
  Batch activations;
  std::vector<std::size_t> categories;
  double t_dnn = 0.0;
};

namespace detail {

template <typename Batch, typename T>
void check_network_chain(const Batch& y0, const LayeredNetwork<T>& net) {
  std::size_t width = y0.n_cols();
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const auto& w = net.layers[l];
    if (w.n_rows() != width) {
      throw ShapeError("layer " + std::to_string(l) + ": expects " +
                       std::to_string(w.n_rows()) + " inputs but receives " +
                       std::to_string(width));
    }
    if (l >= net.biases.size() || net.biases[l].n_cols() != w.n_cols()) {
      throw ShapeError("layer " + std::to_string(l) + ": bias does not match " +
                       std::to_string(w.n_cols()) + " outputs");
    }
    width = w.n_cols();
  }
}

}  // namespace detail

/// Runs every layer on y0 and extracts categories; t_dnn covers both.
/// `workers` = 0 uses all hardware threads.
template <typename Batch, typename T>
InferenceOutput<Batch> infer(const Batch& y0, const LayeredNetwork<T>& net,
                             std::size_t workers = 1) {
  detail::check_network_chain(y0, net);
  InferenceOutput<Batch> out;
  const auto start = std::chrono::steady_clock::now();
  Batch y = y0;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    y = layer_forward(y, net.layers[l], net.biases[l], workers);
  }
  out.categories = extract_categories(y);
  const auto stop = std::chrono::steady_clock::now();
  out.activations = std::move(y);
  out.t_dnn = std::chrono::duration<double>(stop - start).count();
  // steady_clock can report 0 for trivially small networks.
  if (out.t_dnn <= 0.0) out.t_dnn = std::numeric_limits<double>::min();
  return out;
}

/// Reference inference in double precision: plain dense activations and a
/// triple list per layer, no sparsity shortcuts.
template <typename T>
DenseBatch<double> oracle_infer(const DenseBatch<T>& y0, const LayeredNetwork<T>& net) {
  detail::check_network_chain(y0, net);
  const std::size_t batch = y0.n_rows();
  std::size_t width = y0.n_cols();
  std::vector<double> y(y0.data().begin(), y0.data().end());

  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const auto& w = net.layers[l];
    struct Edge {
      std::size_t from, to;
      double weight;
    };
    std::vector<Edge> edges;
    for (std::size_t k = 0; k < w.n_rows(); ++k) {
      auto cols = w.row_cols(k);
      auto vals = w.row_values(k);
      for (std::size_t p = 0; p < cols.size(); ++p) {
        edges.push_back({k, cols[p], static_cast<double>(vals[p])});
      }
    }
    const std::size_t next_width = w.n_cols();
    std::vector<double> z(batch * next_width, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* yi = y.data() + i * width;
      double* zi = z.data() + i * next_width;
      std::size_t nonzeros = 0;
      for (std::size_t k = 0; k < width; ++k) nonzeros += yi[k] != 0.0;
      for (const Edge& e : edges) zi[e.to] += yi[e.from] * e.weight;
      const double gate = nonzeros > 0 ? 1.0 : 0.0;
      for (std::size_t j = 0; j < next_width; ++j) {
        const double v = zi[j] + gate * static_cast<double>(net.biases[l][j]);
        zi[j] = std::min(std::max(v, 0.0), kReluCeiling);
      }
    }
    y = std::move(z);
    width = next_width;
  }
  return DenseBatch<double>(batch, width, std::move(y));
}

template <typename T>
DenseBatch<double> oracle_infer(const SparseMatrix<T>& y0, const LayeredNetwork<T>& net) {
  return oracle_infer(densify(y0), net);
}

/// Set equality of two sorted category lists.
inline bool verify(const std::vector<std::size_t>& computed,
                   const std::vector<std::size_t>& truth) {
  return computed == truth;
}

inline double compute_rate(double n_ops, double t_dnn) {
  if (!(t_dnn > 0.0)) {
    throw InvariantError("compute_rate: t_dnn must be positive, got " + std::to_string(t_dnn));
  }
  return n_ops / t_dnn;
}

struct ChallengeResult {
  std::vector<std::size_t> categories;
  double t_dnn = 0.0;
  std::uint64_t n_inputs = 0;
  std::uint64_t n_connections = 0;
  std::uint64_t n_ops = 0;
  double rate = 0.0;
  bool correct = false;

  std::size_t n_neurons = 0;
  std::size_t n_layers = 0;
  std::size_t workers = 1;
  Representation representation = Representation::sparse;
};

/// One JSON-lines record; categories are written to their own file.
inline nlohmann::json to_json(const ChallengeResult& r) {
  return nlohmann::json{{"n_neurons", r.n_neurons},
                        {"n_layers", r.n_layers},
                        {"n_inputs", r.n_inputs},
                        {"n_connections", r.n_connections},
                        {"n_ops", r.n_ops},
                        {"t_dnn_seconds", r.t_dnn},
                        {"rate", r.rate},
                        {"correct", r.correct},
                        {"workers", r.workers},
                        {"representation", to_string(r.representation)}};
}

struct ChallengeOptions {
  std::size_t workers = 1;
  Representation representation = Representation::sparse;
  std::size_t repetitions = 3;
};

/// Runs the timed inference `repetitions` times and verifies each run
/// against `truth`. One result per repetition, in run order.
template <typename T>
std::vector<ChallengeResult> run_challenge(const SparseMatrix<T>& y0,
                                           const LayeredNetwork<T>& net,
                                           const std::vector<std::size_t>& truth,
                                           const ChallengeOptions& opts) {
  if (opts.repetitions < 1) throw InvariantError("repetitions: must be >= 1");
  const std::size_t workers = resolve_workers(opts.workers);
  std::vector<ChallengeResult> results;
  DenseBatch<T> dense_y0;
  if (opts.representation == Representation::dense) dense_y0 = densify(y0);

  for (std::size_t rep = 0; rep < opts.repetitions; ++rep) {
    ChallengeResult r;
    if (opts.representation == Representation::dense) {
      auto out = infer(dense_y0, net, workers);
      r.categories = std::move(out.categories);
      r.t_dnn = out.t_dnn;
    } else {
      auto out = infer(y0, net, workers);
      r.categories = std::move(out.categories);
      r.t_dnn = out.t_dnn;
    }
    r.n_inputs = y0.n_rows();
    r.n_connections = net.n_connections();
    r.n_ops = r.n_inputs * r.n_connections;
    r.rate = compute_rate(static_cast<double>(r.n_ops), r.t_dnn);
    r.correct = verify(r.categories, truth);
    r.n_neurons = net.width();
    r.n_layers = net.n_layers();
    r.workers = workers;
    r.representation = opts.representation;
    results.push_back(std::move(r));
  }
  return results;
}

/// The repetition with the smallest t_dnn.
inline const ChallengeResult& fastest(const std::vector<ChallengeResult>& results) {
  if (results.empty()) throw InsufficientDataError("fastest: no results");
  return *std::min_element(results.begin(), results.end(),
                           [](const auto& a, const auto& b) { return a.t_dnn < b.t_dnn; });
}

}  // namespace sdnn
