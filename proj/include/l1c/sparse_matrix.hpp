#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace l1c {

struct Triplet {
  int row;
  int col;
  double value;
};

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols);

  /// Duplicate (row, col) entries are summed.
  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> entries);

  /// Appends the next row. Entries need not be sorted; duplicate columns throw.
  void append_row(std::span<const int> cols, std::span<const double> values);

  int rows() const { return static_cast<int>(row_ptr_.size()) - 1; }
  int cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const int> row_cols(int i) const;
  std::span<const double> row_values(int i) const;
  double coeff(int i, int j) const;

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  /// y = A x
  std::vector<double> multiply(std::span<const double> x) const;
  void multiply(std::span<const double> x, std::span<double> y) const;
  /// y = A^T x
  std::vector<double> multiply_transpose(std::span<const double> x) const;

  SparseMatrix transpose() const;
  /// Keeps the listed columns, renumbered in the given order.
  SparseMatrix select_columns(std::span<const int> keep) const;

  /// Throws if the CSR invariants are broken.
  void validate() const;

  void write_matrix_market(std::ostream& os) const;
  static SparseMatrix read_matrix_market(std::istream& is);

 private:
  int cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

std::vector<double> dense_row_sums(const SparseMatrix& m);

}  // namespace l1c
