#include "kfp/banded.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "kfp/errors.hpp"

namespace kfp {

BandedMatrix::BandedMatrix(std::size_t order, std::size_t kl, std::size_t ku)
    : n_(order), kl_(kl), ku_(ku), ld_(2 * kl + ku + 1), ab_(ld_ * order, 0.0) {}

double BandedMatrix::get(std::size_t i, std::size_t j) const {
  return in_band(i, j) ? ab_[index(i, j)] : 0.0;
}

void BandedMatrix::set(std::size_t i, std::size_t j, double v) {
  if (!in_band(i, j)) {
    if (v == 0.0) return;
    throw std::out_of_range("banded: entry (" + std::to_string(i) + "," + std::to_string(j) +
                            ") outside band");
  }
  ab_[index(i, j)] = v;
}

void BandedMatrix::add(std::size_t i, std::size_t j, double v) {
  if (!in_band(i, j)) {
    if (v == 0.0) return;
    throw std::out_of_range("banded: entry outside band");
  }
  ab_[index(i, j)] += v;
}

Vec BandedMatrix::apply(std::span<const double> x) const {
  Vec y(n_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    const double xj = x[j];
    if (xj == 0.0) continue;
    const std::size_t i0 = j > ku_ ? j - ku_ : 0;
    const std::size_t i1 = std::min(n_ - 1, j + kl_);
    for (std::size_t i = i0; i <= i1; ++i) y[i] += ab_[index(i, j)] * xj;
  }
  return y;
}

double BandedMatrix::max_abs() const {
  double m = 0.0;
  for (double v : ab_) m = std::max(m, std::abs(v));
  return m;
}

Matrix BandedMatrix::to_dense() const {
  Matrix d(n_, n_);
  for (std::size_t j = 0; j < n_; ++j) {
    const std::size_t i0 = j > ku_ ? j - ku_ : 0;
    const std::size_t i1 = std::min(n_ - 1, j + kl_);
    for (std::size_t i = i0; i <= i1; ++i) d(i, j) = ab_[index(i, j)];
  }
  return d;
}

// Unblocked band LU in the style of LAPACK dgbtf2. Column j of U extends up
// to kl+ku above the diagonal after pivoting, which is what the extra kl rows
// of storage are for.
BandedLU::BandedLU(BandedMatrix m) : a_(std::move(m)), ipiv_(a_.order()) {
  const std::size_t n = a_.order();
  const std::size_t kl = a_.lower();
  const std::size_t ku = a_.upper();
  const std::size_t ld = a_.leading_dim();
  const std::size_t kv = kl + ku;
  double* ab = a_.storage().data();
  const double tiny = 1e-30 * a_.max_abs();
  auto at = [&](std::size_t i, std::size_t j) -> double& { return ab[kv + i - j + j * ld]; };

  std::size_t ju = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t km = std::min(kl, n - 1 - j);
    double* col = ab + kv + j * ld;  // points at (j, j); rows j..j+km follow
    std::size_t jp = 0;
    double best = std::abs(col[0]);
    for (std::size_t i = 1; i <= km; ++i) {
      if (std::abs(col[i]) > best) {
        best = std::abs(col[i]);
        jp = i;
      }
    }
    ipiv_[j] = j + jp;
    if (!(best > tiny)) {
      throw Singular("banded LU: pivot " + std::to_string(best) + " at column " +
                     std::to_string(j));
    }
    ju = std::max(ju, std::min(j + ku + jp, n - 1));
    if (jp != 0) {
      for (std::size_t c = j; c <= ju; ++c) std::swap(at(j, c), at(j + jp, c));
    }
    const double inv = 1.0 / col[0];
    for (std::size_t i = 1; i <= km; ++i) col[i] *= inv;
    if (km == 0) continue;
    for (std::size_t c = j + 1; c <= ju; ++c) {
      double* target = ab + kv + j - c + c * ld;  // (j, c)
      const double t = target[0];
      if (t == 0.0) continue;
      for (std::size_t i = 1; i <= km; ++i) target[i] -= t * col[i];
    }
  }
}

void BandedLU::solve(std::span<double> b) const {
  const std::size_t n = a_.order();
  const std::size_t kl = a_.lower();
  const std::size_t ld = a_.leading_dim();
  const std::size_t kv = kl + a_.upper();
  const double* ab = a_.storage().data();

  for (std::size_t j = 0; j < n; ++j) {
    if (ipiv_[j] != j) std::swap(b[j], b[ipiv_[j]]);
    const double bj = b[j];
    if (bj == 0.0) continue;
    const std::size_t km = std::min(kl, n - 1 - j);
    const double* col = ab + kv + j * ld;
    for (std::size_t i = 1; i <= km; ++i) b[j + i] -= col[i] * bj;
  }
  for (std::size_t j = n; j-- > 0;) {
    const double* col = ab + kv + j * ld;  // (j, j)
    b[j] /= col[0];
    const double bj = b[j];
    if (bj == 0.0) continue;
    const std::size_t up = std::min(kv, j);
    for (std::size_t i = 1; i <= up; ++i) b[j - i] -= col[-static_cast<std::ptrdiff_t>(i)] * bj;
  }
}

void BandedLU::solve_transpose(std::span<double> b) const {
  const std::size_t n = a_.order();
  const std::size_t kl = a_.lower();
  const std::size_t ld = a_.leading_dim();
  const std::size_t kv = kl + a_.upper();
  const double* ab = a_.storage().data();

  // U^T y = b
  for (std::size_t j = 0; j < n; ++j) {
    const double* col = ab + kv + j * ld;
    const std::size_t up = std::min(kv, j);
    double s = b[j];
    for (std::size_t i = 1; i <= up; ++i) s -= col[-static_cast<std::ptrdiff_t>(i)] * b[j - i];
    b[j] = s / col[0];
  }
  // L^T P x = y
  for (std::size_t j = n; j-- > 0;) {
    const std::size_t km = std::min(kl, n - 1 - j);
    const double* col = ab + kv + j * ld;
    double s = b[j];
    for (std::size_t i = 1; i <= km; ++i) s -= col[i] * b[j + i];
    b[j] = s;
    if (ipiv_[j] != j) std::swap(b[j], b[ipiv_[j]]);
  }
}

Matrix BandedLU::lower_factor() const {
  // Multipliers are stored against the row order at the time they were
  // produced; replay later swaps to get L for P*M = L*U.
  const std::size_t n = a_.order();
  const std::size_t kl = a_.lower();
  Matrix l = Matrix::identity(n);
  const std::size_t kv = kl + a_.upper();
  const std::size_t ld = a_.leading_dim();
  const double* ab = a_.storage().data();
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t km = std::min(kl, n - 1 - j);
    for (std::size_t i = 1; i <= km; ++i) l(j + i, j) = ab[kv + i + j * ld];
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j + 1; k < n; ++k) {
      if (ipiv_[k] != k) std::swap(l(k, j), l(ipiv_[k], j));
    }
  }
  return l;
}

Matrix BandedLU::upper_factor() const {
  const std::size_t n = a_.order();
  const std::size_t kv = a_.lower() + a_.upper();
  const std::size_t ld = a_.leading_dim();
  const double* ab = a_.storage().data();
  Matrix u(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t up = std::min(kv, j);
    for (std::size_t i = 0; i <= up; ++i) u(j - i, j) = ab[kv - i + j * ld];
  }
  return u;
}

std::vector<std::size_t> BandedLU::permutation() const {
  std::vector<std::size_t> perm(a_.order());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t j = 0; j < perm.size(); ++j) std::swap(perm[j], perm[ipiv_[j]]);
  return perm;
}

BandedLU lu_banded(BandedMatrix m) { return BandedLU(std::move(m)); }

}  // namespace kfp
