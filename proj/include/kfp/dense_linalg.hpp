#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kfp/dense.hpp"
#include "kfp/errors.hpp"

namespace kfp {

/// LU with partial pivoting for small dense systems.
template <class T>
class DenseLU {
 public:
  explicit DenseLU(DenseMatrix<T> m) : lu_(std::move(m)), piv_(lu_.rows()) {
    if (!lu_.square()) throw std::invalid_argument("DenseLU: matrix not square");
    const std::size_t n = lu_.rows();
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          p = i;
        }
      }
      piv_[k] = p;
      if (best == 0.0) throw Singular("dense LU: zero pivot at column " + std::to_string(k));
      if (p != k) {
        sign_ = -sign_;
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
      }
      const T inv = T{1} / lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const T l = lu_(i, k) * inv;
        lu_(i, k) = l;
        if (l == T{}) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= l * lu_(k, j);
      }
    }
  }

  std::size_t order() const { return lu_.rows(); }

  void solve_in_place(std::span<T> b) const {
    const std::size_t n = lu_.rows();
    for (std::size_t k = 0; k < n; ++k)
      if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
    for (std::size_t k = 0; k < n; ++k) {
      const T bk = b[k];
      if (bk == T{}) continue;
      for (std::size_t i = k + 1; i < n; ++i) b[i] -= lu_(i, k) * bk;
    }
    for (std::size_t k = n; k-- > 0;) {
      T s = b[k];
      for (std::size_t j = k + 1; j < n; ++j) s -= lu_(k, j) * b[j];
      b[k] = s / lu_(k, k);
    }
  }

  std::vector<T> solve(std::span<const T> b) const {
    std::vector<T> x(b.begin(), b.end());
    solve_in_place(x);
    return x;
  }

  DenseMatrix<T> solve(const DenseMatrix<T>& b) const {
    DenseMatrix<T> x(b.rows(), b.cols());
    for (std::size_t j = 0; j < b.cols(); ++j) {
      auto c = b.column(j);
      solve_in_place(c);
      x.set_column(j, c);
    }
    return x;
  }

  T determinant() const {
    T d = T{static_cast<double>(sign_)};
    for (std::size_t k = 0; k < lu_.rows(); ++k) d *= lu_(k, k);
    return d;
  }

  /// Smallest |pivot| relative to the largest, a cheap conditioning hint.
  double pivot_ratio() const {
    double lo = INFINITY, hi = 0.0;
    for (std::size_t k = 0; k < lu_.rows(); ++k) {
      lo = std::min(lo, std::abs(lu_(k, k)));
      hi = std::max(hi, std::abs(lu_(k, k)));
    }
    return hi > 0.0 ? lo / hi : 0.0;
  }

 private:
  DenseMatrix<T> lu_;
  std::vector<std::size_t> piv_;
  int sign_ = 1;
};

Matrix inverse(const Matrix& m);
double determinant(const Matrix& m);

struct EigenDecomposition {
  CVec values;
  CMatrix vectors;  ///< eigenvectors as columns, unit 2-norm; empty if not requested
};

/// Eigenvalues of a real square matrix: Householder Hessenberg reduction and
/// Francis double-shift QR. Ordered by descending real part, then descending
/// imaginary part; complex values come in exactly conjugate pairs.
CVec dense_eigenvalues(const Matrix& m);

/// As dense_eigenvalues, with eigenvectors by inverse iteration if requested.
EigenDecomposition dense_eigs(const Matrix& m, bool want_vectors = false);

/// Inverse iteration for the eigenvector of m nearest to lambda.
CVec inverse_iteration(const Matrix& m, cplx lambda, int steps = 3);

struct SymmetricEigen {
  Vec values;      ///< ascending
  Matrix vectors;  ///< orthonormal columns matching values
};

/// Householder tridiagonalization and implicit QL.
SymmetricEigen symmetric_eigen(const Matrix& m, bool want_vectors = true);

struct ComplexSchur {
  CMatrix t;  ///< upper triangular
  CMatrix z;  ///< unitary, m = z t z^H
};

ComplexSchur complex_schur(const CMatrix& m);

/// Eigenpairs of a general complex matrix through its Schur form.
EigenDecomposition complex_eigs(const CMatrix& m);

/// Sort key used everywhere for complex spectra.
inline bool re_desc_im_desc(const cplx& a, const cplx& b) {
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

}  // namespace kfp
