#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace adscreen {

struct SparseRow {
  std::span<const std::uint32_t> indices;
  std::span<const double> values;

  std::size_t nnz() const { return indices.size(); }
};

double dot(const SparseRow& a, const SparseRow& b);
double squared_norm(const SparseRow& a);
double squared_distance(const SparseRow& a, const SparseRow& b);

// Compressed sparse rows with sorted column indices inside each row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  explicit SparseMatrix(std::size_t cols) : cols_(cols) {}

  std::size_t rows() const { return row_ptr_.size() - 1; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  SparseRow row(std::size_t r) const {
    const auto begin = row_ptr_[r];
    const auto len = row_ptr_[r + 1] - begin;
    return {std::span(indices_).subspan(begin, len), std::span(values_).subspan(begin, len)};
  }

  // Entries must arrive with strictly increasing column indices.
  void push_row(std::span<const std::uint32_t> indices, std::span<const double> values);
  // Sorts and merges duplicates before appending.
  void push_unsorted_row(std::vector<std::pair<std::uint32_t, double>> entries);

  SparseMatrix select_rows(std::span<const std::size_t> rows) const;

  // Appends dense columns (one vector per row) to the right of the matrix.
  SparseMatrix append_dense_columns(const std::vector<std::vector<double>>& extra) const;

  double at(std::size_t r, std::size_t c) const;
  std::vector<std::vector<double>> to_dense() const;
  static SparseMatrix from_dense(const std::vector<std::vector<double>>& dense);

  const std::vector<std::size_t>& row_offsets() const { return row_ptr_; }
  const std::vector<std::uint32_t>& column_indices() const { return indices_; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
};

}  // namespace adscreen
