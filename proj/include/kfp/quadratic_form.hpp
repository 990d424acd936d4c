#pragma once

#include "kfp/dense.hpp"

namespace kfp {

/// Symmetric real matrix together with its inertia (n+, n0, n-).
struct QuadraticForm {
  Matrix matrix;
  int n_pos = 0;
  int n_zero = 0;
  int n_neg = 0;
  Vec eigenvalues;  ///< ascending

  /// Symmetrizes m (throws if the defect exceeds 1e-12 * |m| unless `force`)
  /// and computes the inertia with threshold 1e-8 * max |eigenvalue|.
  static QuadraticForm from(const Matrix& m, bool force = false);

  std::size_t dim() const { return matrix.rows(); }
  double operator()(std::span<const double> x) const;
  bool positive_definite() const { return n_pos == static_cast<int>(dim()); }
  bool negative_definite() const { return n_neg == static_cast<int>(dim()); }
};

}  // namespace kfp
