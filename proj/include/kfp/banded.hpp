#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kfp/dense.hpp"

namespace kfp {

/// General band matrix in LAPACK-style column-major band storage. Each
/// column carries kl extra rows on top for the fill produced by row pivoting.
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(std::size_t order, std::size_t kl, std::size_t ku);

  std::size_t order() const { return n_; }
  std::size_t lower() const { return kl_; }
  std::size_t upper() const { return ku_; }
  std::size_t leading_dim() const { return ld_; }

  bool in_band(std::size_t i, std::size_t j) const {
    return i <= j + kl_ && j <= i + ku_;
  }
  /// Entry (i, j); zero outside the band.
  double get(std::size_t i, std::size_t j) const;
  void set(std::size_t i, std::size_t j, double v);
  void add(std::size_t i, std::size_t j, double v);

  Vec apply(std::span<const double> x) const;
  double max_abs() const;
  Matrix to_dense() const;

  /// Raw storage; element (i, j) of the matrix lives at ab[(kl+ku+i-j) + j*ld].
  std::vector<double>& storage() { return ab_; }
  const std::vector<double>& storage() const { return ab_; }

 private:
  std::size_t index(std::size_t i, std::size_t j) const { return (kl_ + ku_ + i - j) + j * ld_; }

  std::size_t n_ = 0, kl_ = 0, ku_ = 0, ld_ = 0;
  std::vector<double> ab_;
};

/// LU factorization with partial pivoting restricted to the band.
class BandedLU {
 public:
  /// Factors in place; throws Singular on a pivot below 1e-30 * max|M|.
  explicit BandedLU(BandedMatrix m);

  std::size_t order() const { return a_.order(); }
  void solve(std::span<double> b) const;            ///< M x = b, in place
  void solve_transpose(std::span<double> b) const;  ///< M^T x = b, in place

  /// Dense L and U (unit lower) and the row permutation, for reconstruction tests.
  Matrix lower_factor() const;
  Matrix upper_factor() const;
  std::vector<std::size_t> permutation() const;  ///< P with (P M)(i,:) = M(perm[i],:)

 private:
  BandedMatrix a_;
  std::vector<std::size_t> ipiv_;
};

BandedLU lu_banded(BandedMatrix m);

}  // namespace kfp
