#include "kfp/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "kfp/errors.hpp"

namespace kfp {

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols, std::vector<Triplet> entries)
    : rows_(rows), cols_(cols), ptr_(rows + 1, 0) {
  for (const auto& t : entries) {
    if (t.i >= rows || t.j >= cols) throw std::out_of_range("CsrMatrix: triplet out of range");
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  col_.reserve(entries.size());
  val_.reserve(entries.size());
  std::size_t k = 0;
  while (k < entries.size()) {
    const std::size_t i = entries[k].i, j = entries[k].j;
    double s = 0.0;
    while (k < entries.size() && entries[k].i == i && entries[k].j == j) s += entries[k++].v;
    if (s == 0.0) continue;
    col_.push_back(j);
    val_.push_back(s);
    ++ptr_[i + 1];
  }
  for (std::size_t i = 0; i < rows; ++i) ptr_[i + 1] += ptr_[i];
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  Vec d(n, 1.0);
  return diagonal(d);
}

CsrMatrix CsrMatrix::diagonal(std::span<const double> d) {
  std::vector<Triplet> t;
  t.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) t.push_back({i, i, d[i]});
  return CsrMatrix(d.size(), d.size(), std::move(t));
}

CsrMatrix CsrMatrix::from_dense(const Matrix& m) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) t.push_back({i, j, m(i, j)});
  return CsrMatrix(m.rows(), m.cols(), std::move(t));
}

double CsrMatrix::get(std::size_t i, std::size_t j) const {
  const auto b = col_.begin() + static_cast<std::ptrdiff_t>(ptr_[i]);
  const auto e = col_.begin() + static_cast<std::ptrdiff_t>(ptr_[i + 1]);
  const auto it = std::lower_bound(b, e, j);
  if (it == e || *it != j) return 0.0;
  return val_[static_cast<std::size_t>(it - col_.begin())];
}

void CsrMatrix::apply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) s += val_[k] * x[col_[k]];
    y[i] = s;
  }
}

void CsrMatrix::apply(std::span<const cplx> x, std::span<cplx> y) const {
  for (std::size_t i = 0; i < rows_; ++i) {
    cplx s = 0.0;
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) s += val_[k] * x[col_[k]];
    y[i] = s;
  }
}

Vec CsrMatrix::apply(std::span<const double> x) const {
  if (x.size() != cols_) throw std::invalid_argument("CsrMatrix::apply: size mismatch");
  Vec y(rows_);
  apply(x, std::span<double>(y));
  return y;
}

CVec CsrMatrix::apply(std::span<const cplx> x) const {
  if (x.size() != cols_) throw std::invalid_argument("CsrMatrix::apply: size mismatch");
  CVec y(rows_);
  apply(x, std::span<cplx>(y));
  return y;
}

Vec CsrMatrix::apply_transpose(std::span<const double> x) const {
  Vec y(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) y[col_[k]] += val_[k] * x[i];
  return y;
}

CsrMatrix CsrMatrix::transpose() const {
  CsrMatrix t(cols_, rows_);
  t.col_.resize(nnz());
  t.val_.resize(nnz());
  for (std::size_t k = 0; k < nnz(); ++k) ++t.ptr_[col_[k] + 1];
  for (std::size_t j = 0; j < cols_; ++j) t.ptr_[j + 1] += t.ptr_[j];
  std::vector<std::size_t> next(t.ptr_.begin(), t.ptr_.end() - 1);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) {
      const std::size_t dst = next[col_[k]]++;
      t.col_[dst] = i;
      t.val_[dst] = val_[k];
    }
  }
  return t;
}

CsrMatrix CsrMatrix::scaled(double s) const {
  CsrMatrix r = *this;
  for (auto& v : r.val_) v *= s;
  return r;
}

CsrMatrix CsrMatrix::scaled(std::span<const double> left, std::span<const double> right) const {
  CsrMatrix r = *this;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) {
      if (!left.empty()) r.val_[k] *= left[i];
      if (!right.empty()) r.val_[k] *= right[col_[k]];
    }
  }
  return r;
}

double CsrMatrix::max_abs() const {
  double m = 0.0;
  for (double v : val_) m = std::max(m, std::abs(v));
  return m;
}

double CsrMatrix::norm_inf() const {
  double m = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) s += std::abs(val_[k]);
    m = std::max(m, s);
  }
  return m;
}

double CsrMatrix::norm_1() const { return transpose().norm_inf(); }

std::pair<std::size_t, std::size_t> CsrMatrix::bandwidths() const {
  std::size_t kl = 0, ku = 0;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) {
      const std::size_t j = col_[k];
      if (i > j) kl = std::max(kl, i - j);
      if (j > i) ku = std::max(ku, j - i);
    }
  }
  return {kl, ku};
}

Matrix CsrMatrix::to_dense() const {
  Matrix d(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) d(i, col_[k]) = val_[k];
  return d;
}

std::vector<Triplet> CsrMatrix::triplets() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) t.push_back({i, col_[k], val_[k]});
  return t;
}

void CsrMatrix::write_triplets(std::ostream& os) const {
  os << rows_ << ' ' << cols_ << ' ' << nnz() << '\n';
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k)
      os << i << ' ' << col_[k] << ' ' << std::setprecision(17) << val_[k] << '\n';
  os.precision(old);
}

CsrMatrix CsrMatrix::read_triplets(std::istream& is) {
  std::size_t rows = 0, cols = 0, nnz = 0;
  if (!(is >> rows >> cols >> nnz)) throw ConfigError("triplet file: bad header");
  std::vector<Triplet> t(nnz);
  for (auto& e : t) {
    if (!(is >> e.i >> e.j >> e.v)) throw ConfigError("triplet file: truncated");
  }
  return CsrMatrix(rows, cols, std::move(t));
}

CsrMatrix operator*(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.cols_ != b.rows_) throw std::invalid_argument("sparse product: shape mismatch");
  CsrMatrix c(a.rows_, b.cols_);
  std::vector<double> acc(b.cols_, 0.0);
  std::vector<char> used(b.cols_, 0);
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < a.rows_; ++i) {
    touched.clear();
    for (std::size_t ka = a.ptr_[i]; ka < a.ptr_[i + 1]; ++ka) {
      const std::size_t k = a.col_[ka];
      const double av = a.val_[ka];
      for (std::size_t kb = b.ptr_[k]; kb < b.ptr_[k + 1]; ++kb) {
        const std::size_t j = b.col_[kb];
        if (!used[j]) {
          used[j] = 1;
          touched.push_back(j);
        }
        acc[j] += av * b.val_[kb];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t j : touched) {
      // Keep structural entries even if they cancel to zero; callers inspect them.
      c.col_.push_back(j);
      c.val_.push_back(acc[j]);
      acc[j] = 0.0;
      used[j] = 0;
    }
    c.ptr_[i + 1] = c.col_.size();
  }
  return c;
}

CsrMatrix add(double alpha, const CsrMatrix& a, double beta, const CsrMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("sparse add: shape mismatch");
  std::vector<Triplet> t;
  t.reserve(a.nnz() + b.nnz());
  for (auto e : a.triplets()) t.push_back({e.i, e.j, alpha * e.v});
  for (auto e : b.triplets()) t.push_back({e.i, e.j, beta * e.v});
  return CsrMatrix(a.rows(), a.cols(), std::move(t));
}

CsrMatrix permute(const CsrMatrix& m, std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  std::vector<Triplet> t;
  t.reserve(m.nnz());
  for (auto e : m.triplets()) t.push_back({inv[e.i], inv[e.j], e.v});
  return CsrMatrix(m.rows(), m.cols(), std::move(t));
}

}  // namespace kfp
