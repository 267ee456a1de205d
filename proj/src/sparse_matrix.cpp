#include "l1c/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "l1c/error.hpp"

namespace l1c {

SparseMatrix::SparseMatrix(int rows, int cols) : cols_(cols) {
  if (rows < 0 || cols < 0) throw Error(ErrorCode::InvalidArgument, "negative matrix dimension");
  row_ptr_.assign(static_cast<std::size_t>(rows) + 1, 0);
}

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<Triplet> entries) {
  for (const auto& t : entries) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw Error(ErrorCode::IndexOutOfRange, "triplet outside matrix bounds");
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m;
  m.cols_ = cols;
  m.row_ptr_.assign(static_cast<std::size_t>(rows) + 1, 0);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& t = entries[k];
    if (!m.col_idx_.empty() && k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col) {
      m.values_.back() += t.value;
      continue;
    }
    m.col_idx_.push_back(t.col);
    m.values_.push_back(t.value);
    ++m.row_ptr_[static_cast<std::size_t>(t.row) + 1];
  }
  std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
  return m;
}

void SparseMatrix::append_row(std::span<const int> cols, std::span<const double> values) {
  if (cols.size() != values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "append_row: column/value length mismatch");
  }
  std::vector<std::size_t> order(cols.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cols[a] < cols[b]; });
  int prev = -1;
  for (std::size_t k : order) {
    const int c = cols[k];
    if (c < 0 || c >= cols_) throw Error(ErrorCode::IndexOutOfRange, "append_row: column out of range");
    if (c == prev) throw Error(ErrorCode::InvalidArgument, "append_row: duplicate column");
    prev = c;
    col_idx_.push_back(c);
    values_.push_back(values[k]);
  }
  row_ptr_.push_back(static_cast<int>(col_idx_.size()));
}

std::span<const int> SparseMatrix::row_cols(int i) const {
  const auto b = static_cast<std::size_t>(row_ptr_[i]);
  const auto e = static_cast<std::size_t>(row_ptr_[i + 1]);
  return std::span<const int>(col_idx_).subspan(b, e - b);
}

std::span<const double> SparseMatrix::row_values(int i) const {
  const auto b = static_cast<std::size_t>(row_ptr_[i]);
  const auto e = static_cast<std::size_t>(row_ptr_[i + 1]);
  return std::span<const double>(values_).subspan(b, e - b);
}

double SparseMatrix::coeff(int i, int j) const {
  const auto cols = row_cols(i);
  const auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j) return 0.0;
  return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != static_cast<std::size_t>(cols_) || y.size() != static_cast<std::size_t>(rows())) {
    throw Error(ErrorCode::DimensionMismatch, "multiply: vector length mismatch");
  }
  for (int i = 0; i < rows(); ++i) {
    double acc = 0.0;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) acc += values_[k] * x[col_idx_[k]];
    y[i] = acc;
  }
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(static_cast<std::size_t>(rows()));
  multiply(x, y);
  return y;
}

std::vector<double> SparseMatrix::multiply_transpose(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(rows())) {
    throw Error(ErrorCode::DimensionMismatch, "multiply_transpose: vector length mismatch");
  }
  std::vector<double> y(static_cast<std::size_t>(cols_), 0.0);
  for (int i = 0; i < rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) y[col_idx_[k]] += values_[k] * xi;
  }
  return y;
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t;
  t.cols_ = rows();
  t.row_ptr_.assign(static_cast<std::size_t>(cols_) + 1, 0);
  for (int c : col_idx_) ++t.row_ptr_[static_cast<std::size_t>(c) + 1];
  std::partial_sum(t.row_ptr_.begin(), t.row_ptr_.end(), t.row_ptr_.begin());
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  std::vector<int> next(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  for (int i = 0; i < rows(); ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const int dst = next[col_idx_[k]]++;
      t.col_idx_[dst] = i;
      t.values_[dst] = values_[k];
    }
  }
  return t;
}

SparseMatrix SparseMatrix::select_columns(std::span<const int> keep) const {
  std::vector<int> remap(static_cast<std::size_t>(cols_), -1);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (keep[k] < 0 || keep[k] >= cols_) throw Error(ErrorCode::IndexOutOfRange, "select_columns: bad column");
    remap[keep[k]] = static_cast<int>(k);
  }
  SparseMatrix out(0, static_cast<int>(keep.size()));
  std::vector<int> cols;
  std::vector<double> vals;
  for (int i = 0; i < rows(); ++i) {
    cols.clear();
    vals.clear();
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (const int c = remap[col_idx_[k]]; c >= 0) {
        cols.push_back(c);
        vals.push_back(values_[k]);
      }
    }
    out.append_row(cols, vals);
  }
  return out;
}

void SparseMatrix::validate() const {
  if (row_ptr_.empty() || row_ptr_.front() != 0 ||
      static_cast<std::size_t>(row_ptr_.back()) != col_idx_.size() || col_idx_.size() != values_.size()) {
    throw Error(ErrorCode::InvalidArgument, "SparseMatrix: inconsistent storage");
  }
  for (int i = 0; i < rows(); ++i) {
    if (row_ptr_[i] > row_ptr_[i + 1]) throw Error(ErrorCode::InvalidArgument, "SparseMatrix: row_ptr not monotone");
    int prev = -1;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (col_idx_[k] <= prev || col_idx_[k] >= cols_) {
        throw Error(ErrorCode::IndexOutOfRange, "SparseMatrix: column indices not increasing or out of range");
      }
      if (!std::isfinite(values_[k])) throw Error(ErrorCode::NonFinite, "SparseMatrix: non-finite coefficient");
      prev = col_idx_[k];
    }
  }
}

void SparseMatrix::write_matrix_market(std::ostream& os) const {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << rows() << ' ' << cols_ << ' ' << nnz() << '\n';
  os << std::setprecision(17);
  for (int i = 0; i < rows(); ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      os << i + 1 << ' ' << col_idx_[k] + 1 << ' ' << values_[k] << '\n';
    }
  }
}

SparseMatrix SparseMatrix::read_matrix_market(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("%%MatrixMarket matrix coordinate real general", 0) != 0) {
    throw Error(ErrorCode::UnsupportedFormat, "expected a real general coordinate MatrixMarket header");
  }
  while (std::getline(is, line) && !line.empty() && line[0] == '%') {
  }
  std::istringstream header(line);
  int rows = 0, cols = 0;
  std::size_t nnz = 0;
  if (!(header >> rows >> cols >> nnz)) throw Error(ErrorCode::IOFailure, "bad MatrixMarket size line");
  std::vector<Triplet> entries;
  entries.reserve(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    Triplet t{};
    if (!(is >> t.row >> t.col >> t.value)) throw Error(ErrorCode::IOFailure, "truncated MatrixMarket body");
    --t.row;
    --t.col;
    entries.push_back(t);
  }
  return from_triplets(rows, cols, std::move(entries));
}

std::vector<double> dense_row_sums(const SparseMatrix& m) {
  std::vector<double> sums(static_cast<std::size_t>(m.rows()), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    for (double v : m.row_values(i)) sums[i] += v;
  }
  return sums;
}

}  // namespace l1c
