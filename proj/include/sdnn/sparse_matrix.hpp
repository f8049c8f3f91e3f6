#pragma once

// Containers for layer weights and activation batches.
//
// SparseMatrix is a CSR matrix whose stored values are never zero and whose
// column indices are strictly increasing within each row. DenseBatch is a
// plain row-major matrix. Both are immutable once built and can be shared
// freely across threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sdnn/error.hpp"

namespace sdnn {

using Index = std::uint32_t;

/// Tag selecting the non-validating SparseMatrix constructor. Only kernels
/// that build their output in canonical order should use it.
struct trusted_t {
  explicit trusted_t() = default;
};
inline constexpr trusted_t trusted{};

template <typename T>
struct Triple {
  Index row;
  Index col;
  T value;
};

template <typename T>
class SparseMatrix {
 public:
  using value_type = T;

  SparseMatrix() : row_offsets_(1, 0) {}

  /// Zero matrix of the given shape.
  SparseMatrix(std::size_t n_rows, std::size_t n_cols)
      : n_rows_(n_rows), n_cols_(n_cols), row_offsets_(n_rows + 1, 0) {}

  SparseMatrix(std::size_t n_rows, std::size_t n_cols,
               std::vector<std::size_t> row_offsets,
               std::vector<Index> col_indices, std::vector<T> values)
      : SparseMatrix(trusted, n_rows, n_cols, std::move(row_offsets),
                     std::move(col_indices), std::move(values)) {
    if (auto problem = check_invariants(); !problem.empty()) {
      throw InvariantError("SparseMatrix: " + problem);
    }
  }

  SparseMatrix(trusted_t, std::size_t n_rows, std::size_t n_cols,
               std::vector<std::size_t> row_offsets,
               std::vector<Index> col_indices, std::vector<T> values)
      : n_rows_(n_rows),
        n_cols_(n_cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {}

  /// Builds from 0-based triples in any order. Duplicate coordinates and
  /// zero values are rejected.
  static SparseMatrix from_triples(std::size_t n_rows, std::size_t n_cols,
                                   std::vector<Triple<T>> triples) {
    std::sort(triples.begin(), triples.end(), [](const auto& a, const auto& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    std::vector<std::size_t> offsets(n_rows + 1, 0);
    std::vector<Index> cols;
    std::vector<T> vals;
    cols.reserve(triples.size());
    vals.reserve(triples.size());
    for (const auto& t : triples) {
      if (t.row >= n_rows || t.col >= n_cols) {
        throw InvariantError("SparseMatrix: triple (" + std::to_string(t.row) +
                             ", " + std::to_string(t.col) +
                             ") outside shape " + std::to_string(n_rows) + "x" +
                             std::to_string(n_cols));
      }
      ++offsets[t.row + 1];
      cols.push_back(t.col);
      vals.push_back(t.value);
    }
    for (std::size_t i = 0; i < n_rows; ++i) offsets[i + 1] += offsets[i];
    return SparseMatrix(n_rows, n_cols, std::move(offsets), std::move(cols),
                        std::move(vals));
  }

  /// n x n identity pattern with every diagonal entry set to `value`.
  static SparseMatrix identity(std::size_t n, T value = T{1}) {
    std::vector<std::size_t> offsets(n + 1);
    std::vector<Index> cols(n);
    for (std::size_t i = 0; i <= n; ++i) offsets[i] = i;
    for (std::size_t i = 0; i < n; ++i) cols[i] = static_cast<Index>(i);
    return SparseMatrix(n, n, std::move(offsets), std::move(cols),
                        std::vector<T>(n, value));
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_offsets() const noexcept {
    return row_offsets_;
  }
  std::span<const Index> col_indices() const noexcept { return col_indices_; }
  std::span<const T> values() const noexcept { return values_; }

  std::span<const Index> row_cols(std::size_t i) const noexcept {
    return std::span<const Index>(col_indices_)
        .subspan(row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]);
  }
  std::span<const T> row_values(std::size_t i) const noexcept {
    return std::span<const T>(values_).subspan(
        row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]);
  }
  std::size_t row_nnz(std::size_t i) const noexcept {
    return row_offsets_[i + 1] - row_offsets_[i];
  }

  /// Entry lookup by binary search; absent entries read as zero.
  T at(std::size_t i, std::size_t j) const {
    auto cols = row_cols(i);
    auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<Index>(j));
    if (it == cols.end() || *it != j) return T{0};
    return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
  }

  /// Returns an empty string when every structural invariant holds, else a
  /// description of the first violation found.
  std::string check_invariants() const {
    if (row_offsets_.size() != n_rows_ + 1) return "row_offsets has wrong length";
    if (row_offsets_.front() != 0) return "row_offsets[0] != 0";
    if (col_indices_.size() != values_.size())
      return "col_indices and values differ in length";
    if (row_offsets_.back() != values_.size())
      return "row_offsets[n_rows] != nnz";
    for (std::size_t i = 0; i < n_rows_; ++i) {
      if (row_offsets_[i + 1] < row_offsets_[i])
        return "row_offsets decreases at row " + std::to_string(i);
      for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
        if (col_indices_[p] >= n_cols_)
          return "column index out of range in row " + std::to_string(i);
        if (p > row_offsets_[i] && col_indices_[p] <= col_indices_[p - 1])
          return "column indices not strictly increasing in row " +
                 std::to_string(i);
        if (values_[p] == T{0})
          return "explicit zero stored in row " + std::to_string(i);
      }
    }
    return {};
  }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<T> values_;
};

template <typename T>
class DenseBatch {
 public:
  using value_type = T;

  DenseBatch() = default;
  DenseBatch(std::size_t n_rows, std::size_t n_cols)
      : n_rows_(n_rows), n_cols_(n_cols), data_(n_rows * n_cols, T{0}) {}
  DenseBatch(std::size_t n_rows, std::size_t n_cols, std::vector<T> data)
      : n_rows_(n_rows), n_cols_(n_cols), data_(std::move(data)) {
    if (data_.size() != n_rows_ * n_cols_) {
      throw ShapeError("DenseBatch: data length " +
                       std::to_string(data_.size()) + " != " +
                       std::to_string(n_rows_) + "x" + std::to_string(n_cols_));
    }
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }

  T operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * n_cols_ + j];
  }
  T& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * n_cols_ + j];
  }

  std::span<const T> row(std::size_t i) const noexcept {
    return std::span<const T>(data_).subspan(i * n_cols_, n_cols_);
  }
  std::span<T> row(std::size_t i) noexcept {
    return std::span<T>(data_).subspan(i * n_cols_, n_cols_);
  }
  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }

  friend bool operator==(const DenseBatch&, const DenseBatch&) = default;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
class BiasVector {
 public:
  BiasVector() = default;
  explicit BiasVector(std::vector<T> values) : values_(std::move(values)) {
    for (std::size_t j = 0; j < values_.size(); ++j) {
      if (!std::isfinite(values_[j])) {
        throw NonFiniteError("BiasVector: entry " + std::to_string(j) +
                             " is not finite");
      }
    }
  }
  BiasVector(std::size_t n_cols, T value)
      : BiasVector(std::vector<T>(n_cols, value)) {}

  std::size_t n_cols() const noexcept { return values_.size(); }
  std::span<const T> values() const noexcept { return values_; }
  T operator[](std::size_t j) const noexcept { return values_[j]; }

  friend bool operator==(const BiasVector&, const BiasVector&) = default;

 private:
  std::vector<T> values_;
};

template <typename T>
DenseBatch<T> densify(const SparseMatrix<T>& m) {
  DenseBatch<T> out(m.n_rows(), m.n_cols());
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    auto cols = m.row_cols(i);
    auto vals = m.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) out(i, cols[p]) = vals[p];
  }
  return out;
}

/// Exact zeros are dropped; everything else is kept verbatim.
template <typename T>
SparseMatrix<T> sparsify(const DenseBatch<T>& d) {
  std::vector<std::size_t> offsets(d.n_rows() + 1, 0);
  std::vector<Index> cols;
  std::vector<T> vals;
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    auto r = d.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r[j] != T{0}) {
        cols.push_back(static_cast<Index>(j));
        vals.push_back(r[j]);
      }
    }
    offsets[i + 1] = cols.size();
  }
  return SparseMatrix<T>(trusted, d.n_rows(), d.n_cols(), std::move(offsets),
                         std::move(cols), std::move(vals));
}

/// Element i is true iff row i holds at least one nonzero.
template <typename T>
std::vector<bool> nonzero_row_indicator(const SparseMatrix<T>& m) {
  std::vector<bool> out(m.n_rows());
  for (std::size_t i = 0; i < m.n_rows(); ++i) out[i] = m.row_nnz(i) > 0;
  return out;
}

template <typename T>
std::vector<bool> nonzero_row_indicator(const DenseBatch<T>& d) {
  std::vector<bool> out(d.n_rows());
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    auto r = d.row(i);
    out[i] = std::any_of(r.begin(), r.end(), [](T v) { return v != T{0}; });
  }
  return out;
}

/// Element-type conversion, used to hand float networks to double oracles.
template <typename To, typename From>
SparseMatrix<To> convert(const SparseMatrix<From>& m) {
  auto v = m.values();
  std::vector<To> vals(v.begin(), v.end());
  auto o = m.row_offsets();
  auto c = m.col_indices();
  return SparseMatrix<To>(m.n_rows(), m.n_cols(),
                          std::vector<std::size_t>(o.begin(), o.end()),
                          std::vector<Index>(c.begin(), c.end()),
                          std::move(vals));
}

template <typename To, typename From>
DenseBatch<To> convert(const DenseBatch<From>& d) {
  auto v = d.data();
  return DenseBatch<To>(d.n_rows(), d.n_cols(), std::vector<To>(v.begin(), v.end()));
}

}  // namespace sdnn
