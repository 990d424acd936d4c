#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "kfp/dense.hpp"

namespace kfp {

struct Triplet {
  std::size_t i;
  std::size_t j;
  double v;
};

/// Compressed sparse row matrix with sorted, duplicate-free columns per row.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), ptr_(rows + 1, 0) {}
  /// Duplicates are summed; entries that sum to exactly zero are dropped.
  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);

  static CsrMatrix identity(std::size_t n);
  static CsrMatrix diagonal(std::span<const double> d);
  static CsrMatrix from_dense(const Matrix& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return val_.size(); }

  const std::vector<std::size_t>& row_ptr() const { return ptr_; }
  const std::vector<std::size_t>& col_idx() const { return col_; }
  const std::vector<double>& values() const { return val_; }

  double get(std::size_t i, std::size_t j) const;

  void apply(std::span<const double> x, std::span<double> y) const;
  void apply(std::span<const cplx> x, std::span<cplx> y) const;
  Vec apply(std::span<const double> x) const;
  CVec apply(std::span<const cplx> x) const;
  Vec apply_transpose(std::span<const double> x) const;

  CsrMatrix transpose() const;
  CsrMatrix scaled(double s) const;
  /// diag(left) * M * diag(right); either span may be empty for identity.
  CsrMatrix scaled(std::span<const double> left, std::span<const double> right) const;

  double max_abs() const;
  double norm_inf() const;  ///< max absolute row sum
  double norm_1() const;    ///< max absolute column sum

  /// Largest row - col and col - row offsets of stored entries.
  std::pair<std::size_t, std::size_t> bandwidths() const;

  Matrix to_dense() const;
  std::vector<Triplet> triplets() const;

  /// Header "rows cols nnz", then "i j value" per entry, 17 significant digits.
  void write_triplets(std::ostream& os) const;
  static CsrMatrix read_triplets(std::istream& is);

  friend CsrMatrix operator*(const CsrMatrix& a, const CsrMatrix& b);

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::size_t> ptr_{0};
  std::vector<std::size_t> col_;
  std::vector<double> val_;
};

/// alpha * a + beta * b
CsrMatrix add(double alpha, const CsrMatrix& a, double beta, const CsrMatrix& b);

/// Symmetric permutation: result(i, j) = m(perm[i], perm[j]).
CsrMatrix permute(const CsrMatrix& m, std::span<const std::size_t> perm);

}  // namespace kfp
