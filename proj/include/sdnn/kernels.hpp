#pragma once

// One DNN layer, Y' = h(Y W + B), for dense and sparse activation batches.
//
// W(k, j) != 0 is a connection from neuron k to neuron j and activations are
// row vectors, so the product is a left multiply. The bias row b is added
// only to rows of Y that hold at least one nonzero; rows that are entirely
// zero stay zero. h clamps to [0, kReluCeiling].
//
// Products are summed in at least double precision and rounded to T once
// per output entry, after the bias is added.
//
// Every kernel partitions the batch rows into contiguous blocks, one per
// worker, and each output row is produced by exactly one worker. The
// per-element arithmetic does not depend on the partition, so results are
// identical for any worker count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "sdnn/error.hpp"
#include "sdnn/sparse_matrix.hpp"

namespace sdnn {

inline constexpr double kReluCeiling = 32.0;

/// Worker count after resolving 0 ("use all hardware threads").
inline std::size_t resolve_workers(std::size_t workers) {
  if (workers != 0) return workers;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

namespace detail {

template <typename T>
using accum_t = std::conditional_t<(sizeof(T) < sizeof(double)), double, T>;

/// Runs fn(worker, begin, end) over contiguous row blocks covering
/// [0, n_rows). The first exception thrown by any worker is rethrown.
template <typename Fn>
void for_row_blocks(std::size_t n_rows, std::size_t workers, Fn&& fn) {
  workers = std::min(resolve_workers(workers), std::max<std::size_t>(n_rows, 1));
  if (workers <= 1) {
    fn(std::size_t{0}, std::size_t{0}, n_rows);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = n_rows / workers;
  const std::size_t extra = n_rows % workers;
  std::size_t begin = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t end = begin + chunk + (w < extra ? 1 : 0);
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
    begin = end;
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename T>
inline T clip(T x) noexcept {
  return std::min(std::max(x, T{0}), static_cast<T>(kReluCeiling));
}

[[noreturn]] inline void throw_non_finite(std::size_t row, std::size_t col) {
  throw NonFiniteError("non-finite pre-activation at (" + std::to_string(row) +
                       ", " + std::to_string(col) + ")");
}

inline void check_product_shape(const char* op, std::size_t y_rows,
                                std::size_t y_cols, std::size_t w_rows,
                                std::size_t w_cols) {
  if (y_cols != w_rows) {
    throw ShapeError(std::string(op) + ": activations are " +
                     std::to_string(y_rows) + "x" + std::to_string(y_cols) +
                     " but weights are " + std::to_string(w_rows) + "x" +
                     std::to_string(w_cols));
  }
}

template <typename T>
void check_bias_shape(const SparseMatrix<T>& w, const BiasVector<T>& b) {
  if (b.n_cols() != w.n_cols()) {
    throw ShapeError("layer_forward: bias has " + std::to_string(b.n_cols()) +
                     " entries but weights have " + std::to_string(w.n_cols()) +
                     " columns");
  }
}

/// Gathers rows produced block-by-block into one CSR matrix.
template <typename T>
struct RowBlock {
  std::vector<std::size_t> row_nnz;
  std::vector<Index> cols;
  std::vector<T> vals;
};

template <typename T>
SparseMatrix<T> stitch(std::size_t n_rows, std::size_t n_cols,
                       std::vector<RowBlock<T>>& blocks) {
  std::vector<std::size_t> offsets(n_rows + 1, 0);
  std::size_t total = 0;
  for (auto& b : blocks) total += b.cols.size();
  std::vector<Index> cols;
  std::vector<T> vals;
  cols.reserve(total);
  vals.reserve(total);
  std::size_t row = 0;
  for (auto& b : blocks) {
    for (std::size_t n : b.row_nnz) {
      offsets[row + 1] = offsets[row] + n;
      ++row;
    }
    cols.insert(cols.end(), b.cols.begin(), b.cols.end());
    vals.insert(vals.end(), b.vals.begin(), b.vals.end());
  }
  return SparseMatrix<T>(trusted, n_rows, n_cols, std::move(offsets),
                         std::move(cols), std::move(vals));
}

/// Accumulates row i of Y W into acc, in the order of Y's stored columns and
/// then W's stored columns. Touched columns are appended to `touched`.
template <typename T>
void accumulate_row(std::span<const Index> y_cols, std::span<const T> y_vals,
                    const SparseMatrix<T>& w, std::vector<accum_t<T>>& acc,
                    std::vector<char>& seen, std::vector<Index>& touched) {
  for (std::size_t p = 0; p < y_cols.size(); ++p) {
    const accum_t<T> yv = y_vals[p];
    auto wc = w.row_cols(y_cols[p]);
    auto wv = w.row_values(y_cols[p]);
    for (std::size_t q = 0; q < wc.size(); ++q) {
      const Index j = wc[q];
      if (!seen[j]) {
        seen[j] = 1;
        touched.push_back(j);
      }
      acc[j] += yv * static_cast<accum_t<T>>(wv[q]);
    }
  }
}

/// Accumulates dense row y of Y W into acc. Returns false if y is all zero.
template <typename T>
bool accumulate_dense_row(std::span<const T> y, const SparseMatrix<T>& w,
                          std::vector<accum_t<T>>& acc) {
  bool live = false;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] == T{0}) continue;
    live = true;
    const accum_t<T> yv = y[k];
    auto wc = w.row_cols(k);
    auto wv = w.row_values(k);
    for (std::size_t q = 0; q < wc.size(); ++q) {
      acc[wc[q]] += yv * static_cast<accum_t<T>>(wv[q]);
    }
  }
  return live;
}

}  // namespace detail

/// Clipped ReLU, min(max(x, 0), 32). Rejects NaN and infinities.
template <typename T>
T relu_clip(T x) {
  if (!std::isfinite(x)) throw NonFiniteError("relu_clip: input is not finite");
  return detail::clip(x);
}

/// Z = Y W with a dense batch Y and sparse weights W. No nonlinearity.
template <typename T>
DenseBatch<T> spmm_dense(const DenseBatch<T>& y, const SparseMatrix<T>& w,
                         std::size_t workers = 1) {
  detail::check_product_shape("spmm_dense", y.n_rows(), y.n_cols(), w.n_rows(),
                              w.n_cols());
  DenseBatch<T> z(y.n_rows(), w.n_cols());
  detail::for_row_blocks(y.n_rows(), workers, [&](std::size_t, std::size_t begin,
                                                  std::size_t end) {
    std::vector<detail::accum_t<T>> acc(w.n_cols());
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(acc.begin(), acc.end(), detail::accum_t<T>{0});
      detail::accumulate_dense_row(y.row(i), w, acc);
      auto zr = z.row(i);
      for (std::size_t j = 0; j < zr.size(); ++j) zr[j] = static_cast<T>(acc[j]);
    }
  });
  return z;
}

/// Z = Y W with both operands sparse. Entries that sum to exactly zero are
/// not stored.
template <typename T>
SparseMatrix<T> spgemm(const SparseMatrix<T>& y, const SparseMatrix<T>& w,
                       std::size_t workers = 1) {
  detail::check_product_shape("spgemm", y.n_rows(), y.n_cols(), w.n_rows(),
                              w.n_cols());
  const std::size_t nw = resolve_workers(workers);
  std::vector<detail::RowBlock<T>> blocks(std::min(nw, std::max<std::size_t>(y.n_rows(), 1)));
  detail::for_row_blocks(y.n_rows(), workers, [&](std::size_t wid, std::size_t begin,
                                                  std::size_t end) {
    auto& out = blocks[wid];
    std::vector<detail::accum_t<T>> acc(w.n_cols(), 0);
    std::vector<char> seen(w.n_cols(), 0);
    std::vector<Index> touched;
    for (std::size_t i = begin; i < end; ++i) {
      touched.clear();
      detail::accumulate_row(y.row_cols(i), y.row_values(i), w, acc, seen, touched);
      std::sort(touched.begin(), touched.end());
      std::size_t kept = 0;
      for (Index j : touched) {
        const T v = static_cast<T>(acc[j]);
        if (v != T{0}) {
          out.cols.push_back(j);
          out.vals.push_back(v);
          ++kept;
        }
        acc[j] = 0;
        seen[j] = 0;
      }
      out.row_nnz.push_back(kept);
    }
  });
  return detail::stitch(y.n_rows(), w.n_cols(), blocks);
}

/// h(Y W + B) on a dense batch.
template <typename T>
DenseBatch<T> layer_forward(const DenseBatch<T>& y, const SparseMatrix<T>& w,
                            const BiasVector<T>& b, std::size_t workers = 1) {
  detail::check_product_shape("layer_forward", y.n_rows(), y.n_cols(),
                              w.n_rows(), w.n_cols());
  detail::check_bias_shape(w, b);
  DenseBatch<T> z(y.n_rows(), w.n_cols());
  auto bias = b.values();
  detail::for_row_blocks(y.n_rows(), workers, [&](std::size_t, std::size_t begin,
                                                  std::size_t end) {
    std::vector<detail::accum_t<T>> acc(w.n_cols());
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(acc.begin(), acc.end(), detail::accum_t<T>{0});
      if (!detail::accumulate_dense_row(y.row(i), w, acc)) continue;
      auto zr = z.row(i);
      for (std::size_t j = 0; j < zr.size(); ++j) {
        const T v = static_cast<T>(acc[j] + bias[j]);
        if (!std::isfinite(v)) detail::throw_non_finite(i, j);
        zr[j] = detail::clip(v);
      }
    }
  });
  return z;
}

/// h(Y W + B) on a sparse batch. Non-positive results are not stored, so the
/// output keeps only the live activations.
template <typename T>
SparseMatrix<T> layer_forward(const SparseMatrix<T>& y, const SparseMatrix<T>& w,
                              const BiasVector<T>& b, std::size_t workers = 1) {
  detail::check_product_shape("layer_forward", y.n_rows(), y.n_cols(),
                              w.n_rows(), w.n_cols());
  detail::check_bias_shape(w, b);
  const std::size_t n_out = w.n_cols();
  auto bias = b.values();
  const std::size_t nw = resolve_workers(workers);
  std::vector<detail::RowBlock<T>> blocks(std::min(nw, std::max<std::size_t>(y.n_rows(), 1)));
  detail::for_row_blocks(y.n_rows(), workers, [&](std::size_t wid, std::size_t begin,
                                                  std::size_t end) {
    auto& out = blocks[wid];
    std::vector<detail::accum_t<T>> acc(n_out, 0);
    std::vector<char> seen(n_out, 0);
    std::vector<Index> touched;
    for (std::size_t i = begin; i < end; ++i) {
      if (y.row_nnz(i) == 0) {
        out.row_nnz.push_back(0);
        continue;
      }
      touched.clear();
      detail::accumulate_row(y.row_cols(i), y.row_values(i), w, acc, seen, touched);
      std::size_t kept = 0;
      for (std::size_t j = 0; j < n_out; ++j) {
        const T v = static_cast<T>(acc[j] + bias[j]);
        if (!std::isfinite(v)) detail::throw_non_finite(i, j);
        const T h = detail::clip(v);
        if (h > T{0}) {
          out.cols.push_back(static_cast<Index>(j));
          out.vals.push_back(h);
          ++kept;
        }
      }
      for (Index j : touched) {
        acc[j] = 0;
        seen[j] = 0;
      }
      out.row_nnz.push_back(kept);
    }
  });
  return detail::stitch(y.n_rows(), n_out, blocks);
}

}  // namespace sdnn
