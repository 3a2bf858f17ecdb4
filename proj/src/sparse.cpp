#include "adscreen/sparse.hpp"

#include <algorithm>
#include <cmath>

#include "adscreen/error.hpp"

namespace adscreen {

double dot(const SparseRow& a, const SparseRow& b) {
  double sum = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.indices.size() && j < b.indices.size()) {
    if (a.indices[i] == b.indices[j]) {
      sum += a.values[i++] * b.values[j++];
    } else if (a.indices[i] < b.indices[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return sum;
}

double squared_norm(const SparseRow& a) {
  double sum = 0.0;
  for (double v : a.values) sum += v * v;
  return sum;
}

double squared_distance(const SparseRow& a, const SparseRow& b) {
  return std::max(0.0, squared_norm(a) + squared_norm(b) - 2.0 * dot(a, b));
}

void SparseMatrix::push_row(std::span<const std::uint32_t> indices,
                            std::span<const double> values) {
  if (indices.size() != values.size())
    throw Error(ErrorKind::Invariant, "sparse row index/value length mismatch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= cols_ || (k > 0 && indices[k] <= indices[k - 1]))
      throw Error(ErrorKind::Invariant, "sparse row indices must be sorted and in range");
  }
  indices_.insert(indices_.end(), indices.begin(), indices.end());
  values_.insert(values_.end(), values.begin(), values.end());
  row_ptr_.push_back(values_.size());
}

void SparseMatrix::push_unsorted_row(std::vector<std::pair<std::uint32_t, double>> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  for (const auto& [c, v] : entries) {
    if (!idx.empty() && idx.back() == c) {
      val.back() += v;
    } else {
      idx.push_back(c);
      val.push_back(v);
    }
  }
  push_row(idx, val);
}

SparseMatrix SparseMatrix::select_rows(std::span<const std::size_t> rows) const {
  SparseMatrix out(cols_);
  for (auto r : rows) {
    const auto view = row(r);
    out.push_row(view.indices, view.values);
  }
  return out;
}

SparseMatrix SparseMatrix::append_dense_columns(
    const std::vector<std::vector<double>>& extra) const {
  if (extra.size() != rows())
    throw Error(ErrorKind::DimensionMismatch, "dense block row count differs from matrix");
  const std::size_t width = extra.empty() ? 0 : extra.front().size();
  SparseMatrix out(cols_ + width);
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  for (std::size_t r = 0; r < rows(); ++r) {
    if (extra[r].size() != width)
      throw Error(ErrorKind::DimensionMismatch, "ragged dense block");
    const auto view = row(r);
    idx.assign(view.indices.begin(), view.indices.end());
    val.assign(view.values.begin(), view.values.end());
    for (std::size_t c = 0; c < width; ++c) {
      if (extra[r][c] == 0.0) continue;
      idx.push_back(static_cast<std::uint32_t>(cols_ + c));
      val.push_back(extra[r][c]);
    }
    out.push_row(idx, val);
  }
  return out;
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  const auto view = row(r);
  const auto it = std::lower_bound(view.indices.begin(), view.indices.end(), c);
  if (it == view.indices.end() || *it != c) return 0.0;
  return view.values[static_cast<std::size_t>(it - view.indices.begin())];
}

std::vector<std::vector<double>> SparseMatrix::to_dense() const {
  std::vector<std::vector<double>> dense(rows(), std::vector<double>(cols_, 0.0));
  for (std::size_t r = 0; r < rows(); ++r) {
    const auto view = row(r);
    for (std::size_t k = 0; k < view.nnz(); ++k) dense[r][view.indices[k]] = view.values[k];
  }
  return dense;
}

SparseMatrix SparseMatrix::from_dense(const std::vector<std::vector<double>>& dense) {
  const std::size_t cols = dense.empty() ? 0 : dense.front().size();
  SparseMatrix out(cols);
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  for (const auto& row : dense) {
    if (row.size() != cols) throw Error(ErrorKind::DimensionMismatch, "ragged dense matrix");
    idx.clear();
    val.clear();
    for (std::size_t c = 0; c < cols; ++c) {
      if (row[c] == 0.0) continue;
      idx.push_back(static_cast<std::uint32_t>(c));
      val.push_back(row[c]);
    }
    out.push_row(idx, val);
  }
  return out;
}

}  // namespace adscreen
