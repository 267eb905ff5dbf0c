#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mdfem/error.hpp"
#include "mdfem/mesh.hpp"

namespace mdfem {

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Compressed-row matrix. Column indices are strictly increasing per row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_ptr,
               std::vector<std::size_t> cols, std::vector<double> values)
      : n_rows_(n_rows), n_cols_(n_cols), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)),
        values_(std::move(values)) {
    if (row_ptr_.size() != n_rows_ + 1 || cols_.size() != values_.size() || row_ptr_.back() != cols_.size()) {
      throw ParameterError("inconsistent compressed-row arrays");
    }
    for (std::size_t i = 0; i < n_rows_; ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        if (cols_[k] >= n_cols_ || (k > row_ptr_[i] && cols_[k] <= cols_[k - 1])) {
          throw ParameterError("column indices must be in range and strictly increasing in row " + std::to_string(i));
        }
      }
    }
  }

  std::size_t rows() const { return n_rows_; }
  std::size_t cols() const { return n_cols_; }
  std::size_t nnz() const { return values_.size(); }
  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const std::size_t> col_index() const { return cols_; }
  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }

  double at(std::size_t i, std::size_t j) const {
    const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    return (it != last && *it == j) ? values_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < n_rows_; ++i) {
      double s = 0.0;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[cols_[k]];
      y[i] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(n_rows_);
    multiply(x, y);
    return y;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(std::min(n_rows_, n_cols_), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = at(i, i);
    return d;
  }

  SparseMatrix transpose() const {
    std::vector<std::size_t> ptr(n_cols_ + 1, 0);
    for (auto c : cols_) ++ptr[c + 1];
    for (std::size_t j = 0; j < n_cols_; ++j) ptr[j + 1] += ptr[j];
    std::vector<std::size_t> cols(nnz());
    std::vector<double> vals(nnz());
    auto next = ptr;
    for (std::size_t i = 0; i < n_rows_; ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        const std::size_t dst = next[cols_[k]]++;
        cols[dst] = i;
        vals[dst] = values_[k];
      }
    }
    return {n_cols_, n_rows_, std::move(ptr), std::move(cols), std::move(vals)};
  }

  bool same_pattern(const SparseMatrix& o) const {
    return n_rows_ == o.n_rows_ && n_cols_ == o.n_cols_ && row_ptr_ == o.row_ptr_ && cols_ == o.cols_;
  }

  std::vector<std::vector<double>> to_dense() const {
    std::vector<std::vector<double>> d(n_rows_, std::vector<double>(n_cols_, 0.0));
    for (std::size_t i = 0; i < n_rows_; ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) d[i][cols_[k]] = values_[k];
    }
    return d;
  }

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> values_;
};

/// Duplicates are summed in (row, col, value) order, so any permutation of
/// the same triplet list gives a bit-identical matrix.
inline SparseMatrix csr_from_triplets(std::size_t n_rows, std::size_t n_cols, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= n_rows || t.col >= n_cols) {
      throw ParameterError("triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) + ") out of range");
    }
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.row, a.col, a.value) < std::tie(b.row, b.col, b.value);
  });
  std::vector<std::size_t> ptr(n_rows + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  for (std::size_t k = 0; k < triplets.size();) {
    const auto& t = triplets[k];
    double sum = 0.0;
    std::size_t m = k;
    for (; m < triplets.size() && triplets[m].row == t.row && triplets[m].col == t.col; ++m) sum += triplets[m].value;
    cols.push_back(t.col);
    vals.push_back(sum);
    ++ptr[t.row + 1];
    k = m;
  }
  for (std::size_t i = 0; i < n_rows; ++i) ptr[i + 1] += ptr[i];
  return {n_rows, n_cols, std::move(ptr), std::move(cols), std::move(vals)};
}

/// a*A + b*B for two matrices sharing one sparsity pattern.
inline SparseMatrix combine(double a, const SparseMatrix& A, double b, const SparseMatrix& B) {
  if (!A.same_pattern(B)) throw ParameterError("combine() needs matrices with identical sparsity patterns");
  std::vector<double> v(A.nnz());
  const auto va = A.values();
  const auto vb = B.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a * va[k] + b * vb[k];
  return {A.rows(), A.cols(), {A.row_ptr().begin(), A.row_ptr().end()},
          {A.col_index().begin(), A.col_index().end()}, std::move(v)};
}

/// Coordinate-format dump, one `i j value` line per stored entry.
inline void write_coordinate(std::ostream& os, const SparseMatrix& A) {
  const auto ptr = A.row_ptr();
  const auto cols = A.col_index();
  const auto vals = A.values();
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) os << i << ' ' << cols[k] << ' ' << detail::fmt17(vals[k]) << '\n';
  }
}

}  // namespace mdfem
