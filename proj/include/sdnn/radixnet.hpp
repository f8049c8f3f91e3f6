#pragma once

// Synthetic layered sparse networks in the style of RadiX-Net.
//
// A base layer over N0 = r_0 * r_1 * ... * r_{k-1} neurons is a butterfly on
// one mixed-radix digit: neuron j connects to every neuron whose digits agree
// with j's except at that digit. Digit 0 is the least significant. Layer l
// uses digit (l mod k), so any k consecutive layers wire every input to every
// output through the same number of paths. Each base layer is then expanded
// by a Kronecker product with an all-ones kron_width x kron_width block,
// giving N = N0 * kron_width neurons and fan-in r_d * kron_width.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sdnn/error.hpp"
#include "sdnn/sparse_matrix.hpp"

namespace sdnn {

/// Fan-in of every neuron in the challenge networks.
inline constexpr std::size_t kChallengeFanIn = 32;

struct NetworkSpec {
  std::vector<std::size_t> radices;
  std::size_t n_layers = 1;
  std::size_t kron_width = 1;
  double weight_value = 0.0625;
  double bias_value = -0.30;

  std::size_t base_width() const {
    return std::accumulate(radices.begin(), radices.end(), std::size_t{1},
                           std::multiplies<>{});
  }
  std::size_t width() const { return base_width() * kron_width; }
  std::size_t fan_in(std::size_t layer) const {
    return radices[layer % radices.size()] * kron_width;
  }

  /// Throws InvariantError naming the offending field.
  void validate() const {
    if (radices.empty()) throw InvariantError("radices: must not be empty");
    for (std::size_t r : radices) {
      if (r < 2) {
        throw InvariantError("radices: every radix must be >= 2, got " +
                             std::to_string(r));
      }
    }
    if (n_layers < 1) throw InvariantError("layers: must be >= 1");
    if (kron_width < 1) throw InvariantError("kron_width: must be >= 1");
    if (!std::isfinite(weight_value) || weight_value == 0.0) {
      throw InvariantError("weight_value: must be finite and nonzero");
    }
    if (!std::isfinite(bias_value)) {
      throw InvariantError("bias_value: must be finite");
    }
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Bias for an N-neuron challenge network: -0.30 at 1024 neurons, 0.05 lower
/// for every further factor of 4. Narrower networks use -0.30.
inline double default_bias(std::size_t n_neurons) {
  if (n_neurons <= 1024) return -0.30;
  const double steps = std::log2(static_cast<double>(n_neurons) / 1024.0) / 2.0;
  return -0.30 - 0.05 * steps;
}

/// Spec with fan-in 32 everywhere and the requested width. All radices are
/// equal to some r with r * kron_width == 32 and N == r^k * kron_width; the
/// largest such r is chosen. Throws when no such factorization exists.
inline NetworkSpec challenge_spec(std::size_t n_neurons, std::size_t n_layers) {
  for (std::size_t r = kChallengeFanIn; r >= 2; r /= 2) {
    const std::size_t kw = kChallengeFanIn / r;
    if (n_neurons % kw != 0) continue;
    std::size_t rest = n_neurons / kw;
    std::size_t digits = 0;
    while (rest > 1 && rest % r == 0) {
      rest /= r;
      ++digits;
    }
    if (rest == 1 && digits >= 1) {
      NetworkSpec spec;
      spec.radices.assign(digits, r);
      spec.n_layers = n_layers;
      spec.kron_width = kw;
      spec.bias_value = default_bias(n_neurons);
      return spec;
    }
  }
  throw InvariantError("neurons: " + std::to_string(n_neurons) +
                       " has no fan-in-32 radix factorization");
}

template <typename T = float>
struct LayeredNetwork {
  std::vector<SparseMatrix<T>> layers;
  std::vector<BiasVector<T>> biases;
  NetworkSpec spec;

  std::size_t n_layers() const noexcept { return layers.size(); }
  std::size_t width() const noexcept {
    return layers.empty() ? 0 : layers.front().n_cols();
  }
  /// Total stored connections across all layers.
  std::uint64_t n_connections() const noexcept {
    std::uint64_t total = 0;
    for (const auto& w : layers) total += w.nnz();
    return total;
  }
};

/// Butterfly pattern over one mixed-radix digit of n0 neurons.
template <typename T = float>
SparseMatrix<T> butterfly_layer(const std::vector<std::size_t>& radices,
                                std::size_t digit, std::size_t n0,
                                T weight_value = T{1}) {
  if (digit >= radices.size()) {
    throw InvariantError("butterfly_layer: digit " + std::to_string(digit) +
                         " out of range for " + std::to_string(radices.size()) +
                         " radices");
  }
  const std::size_t product = std::accumulate(
      radices.begin(), radices.end(), std::size_t{1}, std::multiplies<>{});
  if (product != n0) {
    throw ShapeError("butterfly_layer: n0 = " + std::to_string(n0) +
                     " but radices multiply to " + std::to_string(product));
  }
  std::size_t stride = 1;
  for (std::size_t d = 0; d < digit; ++d) stride *= radices[d];
  const std::size_t r = radices[digit];

  std::vector<std::size_t> offsets(n0 + 1);
  std::vector<Index> cols;
  cols.reserve(n0 * r);
  for (std::size_t j = 0; j < n0; ++j) {
    offsets[j] = cols.size();
    const std::size_t base = j - ((j / stride) % r) * stride;
    for (std::size_t t = 0; t < r; ++t) {
      cols.push_back(static_cast<Index>(base + t * stride));
    }
  }
  offsets[n0] = cols.size();
  std::vector<T> vals(cols.size(), weight_value);
  return SparseMatrix<T>(trusted, n0, n0, std::move(offsets), std::move(cols),
                         std::move(vals));
}

/// layer (x) J with J the all-ones kron_width x kron_width block.
template <typename T>
SparseMatrix<T> kronecker_expand(const SparseMatrix<T>& layer,
                                 std::size_t kron_width) {
  if (kron_width < 1) throw InvariantError("kronecker_expand: kron_width must be >= 1");
  if (kron_width == 1) return layer;
  const std::size_t kw = kron_width;
  const std::size_t n_rows = layer.n_rows() * kw;
  std::vector<std::size_t> offsets(n_rows + 1, 0);
  std::vector<Index> cols;
  std::vector<T> vals;
  cols.reserve(layer.nnz() * kw * kw);
  vals.reserve(layer.nnz() * kw * kw);
  for (std::size_t i = 0; i < layer.n_rows(); ++i) {
    auto src_cols = layer.row_cols(i);
    auto src_vals = layer.row_values(i);
    for (std::size_t a = 0; a < kw; ++a) {
      for (std::size_t p = 0; p < src_cols.size(); ++p) {
        for (std::size_t b = 0; b < kw; ++b) {
          cols.push_back(static_cast<Index>(src_cols[p] * kw + b));
          vals.push_back(src_vals[p]);
        }
      }
      offsets[i * kw + a + 1] = cols.size();
    }
  }
  return SparseMatrix<T>(trusted, n_rows, layer.n_cols() * kw, std::move(offsets),
                         std::move(cols), std::move(vals));
}

template <typename T = float>
LayeredNetwork<T> generate_network(const NetworkSpec& spec) {
  spec.validate();
  const std::size_t n0 = spec.base_width();
  const T weight = static_cast<T>(spec.weight_value);
  const std::size_t k = spec.radices.size();

  // One expanded layer per digit; layers sharing a digit share the pattern.
  std::vector<SparseMatrix<T>> per_digit;
  per_digit.reserve(k);
  for (std::size_t d = 0; d < k; ++d) {
    per_digit.push_back(
        kronecker_expand(butterfly_layer<T>(spec.radices, d, n0, weight), spec.kron_width));
  }

  LayeredNetwork<T> net;
  net.spec = spec;
  net.layers.reserve(spec.n_layers);
  net.biases.reserve(spec.n_layers);
  const BiasVector<T> bias(spec.width(), static_cast<T>(spec.bias_value));
  for (std::size_t l = 0; l < spec.n_layers; ++l) {
    net.layers.push_back(per_digit[l % k]);
    net.biases.push_back(bias);
  }
  return net;
}

/// Connections in a challenge network: 32 per neuron per layer.
constexpr std::uint64_t count_connections(std::uint64_t n_layers,
                                          std::uint64_t n_neurons) noexcept {
  return kChallengeFanIn * n_layers * n_neurons;
}

/// Product of the binary adjacency patterns of layers [from_layer, to_layer).
/// Entry (i, j) is the number of distinct paths from neuron i to neuron j.
template <typename T>
DenseBatch<std::uint64_t> count_paths(const LayeredNetwork<T>& net,
                                      std::size_t from_layer,
                                      std::size_t to_layer) {
  if (from_layer >= to_layer || to_layer > net.n_layers()) {
    throw InvariantError("count_paths: need from_layer < to_layer <= " +
                         std::to_string(net.n_layers()));
  }
  const std::size_t n = net.layers[from_layer].n_rows();
  DenseBatch<std::uint64_t> paths(n, net.layers[from_layer].n_cols());
  {
    const auto& w = net.layers[from_layer];
    for (std::size_t i = 0; i < w.n_rows(); ++i) {
      for (Index j : w.row_cols(i)) paths(i, j) = 1;
    }
  }
  for (std::size_t l = from_layer + 1; l < to_layer; ++l) {
    const auto& w = net.layers[l];
    if (w.n_rows() != paths.n_cols()) {
      throw ShapeError("count_paths: layer " + std::to_string(l) +
                       " does not chain with its predecessor");
    }
    DenseBatch<std::uint64_t> next(n, w.n_cols());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < w.n_rows(); ++k) {
        const std::uint64_t c = paths(i, k);
        if (c == 0) continue;
        for (Index j : w.row_cols(k)) next(i, j) += c;
      }
    }
    paths = std::move(next);
  }
  return paths;
}

inline std::string format_radices(const std::vector<std::size_t>& radices) {
  std::ostringstream os;
  for (std::size_t i = 0; i < radices.size(); ++i) {
    if (i) os << ',';
    os << radices[i];
  }
  return os.str();
}

}  // namespace sdnn
