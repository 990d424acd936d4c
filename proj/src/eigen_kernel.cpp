#include "kfp/eigen_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "kfp/dense_linalg.hpp"
#include "kfp/errors.hpp"

namespace kfp {

namespace {

cplx cdot(std::span<const cplx> a, std::span<const cplx> b) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

void normalize(CVec& v) {
  const double nv = norm2(std::span<const cplx>(v));
  for (auto& x : v) x /= nv;
}

}  // namespace

BandedMatrix to_banded(const CsrMatrix& m, double sigma, const CsrMatrix* mass) {
  if (m.rows() != m.cols()) throw std::invalid_argument("to_banded: matrix not square");
  auto [kl, ku] = m.bandwidths();
  if (mass != nullptr) {
    auto [ml, mu] = mass->bandwidths();
    kl = std::max(kl, ml);
    ku = std::max(ku, mu);
  }
  BandedMatrix b(m.rows(), kl, ku);
  for (const auto& t : m.triplets()) b.add(t.i, t.j, t.v);
  if (sigma != 0.0) {
    if (mass != nullptr) {
      for (const auto& t : mass->triplets()) b.add(t.i, t.j, -sigma * t.v);
    } else {
      for (std::size_t i = 0; i < m.rows(); ++i) b.add(i, i, -sigma);
    }
  }
  return b;
}

BandedMatrix to_banded_embedded(const CsrMatrix& m, cplx sigma, const CsrMatrix* mass) {
  if (m.rows() != m.cols()) throw std::invalid_argument("to_banded: matrix not square");
  auto [kl, ku] = m.bandwidths();
  if (mass != nullptr) {
    auto [ml, mu] = mass->bandwidths();
    kl = std::max(kl, ml);
    ku = std::max(ku, mu);
  }
  BandedMatrix b(2 * m.rows(), 2 * kl + 1, 2 * ku + 1);
  // complex entry a = re + i im  ->  block [[re, -im], [im, re]]
  auto put = [&](std::size_t i, std::size_t j, cplx a) {
    b.add(2 * i, 2 * j, a.real());
    b.add(2 * i, 2 * j + 1, -a.imag());
    b.add(2 * i + 1, 2 * j, a.imag());
    b.add(2 * i + 1, 2 * j + 1, a.real());
  };
  for (const auto& t : m.triplets()) put(t.i, t.j, t.v);
  if (mass != nullptr) {
    for (const auto& t : mass->triplets()) put(t.i, t.j, -sigma * t.v);
  } else {
    for (std::size_t i = 0; i < m.rows(); ++i) put(i, i, -sigma);
  }
  return b;
}

ShiftedSolver::ShiftedSolver(const CsrMatrix& m, cplx sigma, const CsrMatrix* mass)
    : n_(m.rows()), sigma_(sigma), complex_(sigma.imag() != 0.0) {
  if (complex_) {
    lu_.emplace(to_banded_embedded(m, sigma, mass));
    work_.resize(2 * n_);
  } else {
    lu_.emplace(to_banded(m, sigma.real(), mass));
    work_.resize(n_);
  }
}

void ShiftedSolver::solve(std::span<double> b) const {
  if (complex_) throw std::logic_error("ShiftedSolver: real solve with complex shift");
  lu_->solve(b);
}

void ShiftedSolver::solve(std::span<cplx> b) const {
  if (complex_) {
    for (std::size_t i = 0; i < n_; ++i) {
      work_[2 * i] = b[i].real();
      work_[2 * i + 1] = b[i].imag();
    }
    lu_->solve(work_);
    for (std::size_t i = 0; i < n_; ++i) b[i] = cplx(work_[2 * i], work_[2 * i + 1]);
    return;
  }
  for (std::size_t i = 0; i < n_; ++i) work_[i] = b[i].real();
  lu_->solve(work_);
  std::vector<double> im(n_);
  for (std::size_t i = 0; i < n_; ++i) im[i] = b[i].imag();
  bool any_im = std::any_of(im.begin(), im.end(), [](double v) { return v != 0.0; });
  if (any_im) lu_->solve(im);
  for (std::size_t i = 0; i < n_; ++i) b[i] = cplx(work_[i], im[i]);
}

void ShiftedSolver::solve_adjoint(std::span<cplx> b) const {
  if (complex_) {
    // The transpose of the real embedding of A is the embedding of A^H.
    for (std::size_t i = 0; i < n_; ++i) {
      work_[2 * i] = b[i].real();
      work_[2 * i + 1] = b[i].imag();
    }
    lu_->solve_transpose(work_);
    for (std::size_t i = 0; i < n_; ++i) b[i] = cplx(work_[2 * i], work_[2 * i + 1]);
    return;
  }
  std::vector<double> re(n_), im(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    re[i] = b[i].real();
    im[i] = b[i].imag();
  }
  lu_->solve_transpose(re);
  lu_->solve_transpose(im);
  for (std::size_t i = 0; i < n_; ++i) b[i] = cplx(re[i], im[i]);
}

void ShiftedSolver::solve_transpose(std::span<cplx> b) const {
  if (!complex_) {
    solve_adjoint(b);
    return;
  }
  for (auto& v : b) v = std::conj(v);
  solve_adjoint(b);
  for (auto& v : b) v = std::conj(v);
}

CVec arnoldi_start_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CVec v(n);
  const double base = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& x : v) x = base * (1.0 + 1e-3 * u(rng));
  normalize(v);
  return v;
}

ArnoldiResult shift_invert_arnoldi(const LinearOp& inverse, const LinearOp& op, cplx sigma,
                                   std::size_t n, double op_norm, const ArnoldiOptions& opt,
                                   std::span<const cplx> start) {
  const int k = opt.wanted;
  int m = opt.basis > 0 ? opt.basis : 2 * k + 8;
  m = std::min<int>(m, static_cast<int>(n));
  if (k <= 0 || k > m) throw std::invalid_argument("arnoldi: bad wanted/basis sizes");
  const double tol = opt.tol * op_norm;

  std::vector<CVec> v(m + 1, CVec(n));
  CMatrix h(m + 1, m);
  v[0] = start.empty() ? arnoldi_start_vector(n, opt.seed) : CVec(start.begin(), start.end());
  normalize(v[0]);

  std::mt19937_64 rng(opt.seed + 1);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  ArnoldiResult res;
  res.basis_size = m;
  int p = 0;
  CVec w(n), coef;
  for (int cycle = 0; cycle <= opt.max_restarts; ++cycle) {
    res.iterations = cycle + 1;
    for (int j = p; j < m; ++j) {
      inverse(v[j], w);
      double wnorm0 = norm2(std::span<const cplx>(w));
      coef.assign(j + 1, 0.0);
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const cplx c = cdot(v[i], w);
          coef[i] += c;
          for (std::size_t r = 0; r < n; ++r) w[r] -= c * v[i][r];
        }
      }
      double beta = norm2(std::span<const cplx>(w));
      for (int i = 0; i <= j; ++i) h(i, j) = coef[i];
      if (beta <= 1e-13 * wnorm0) {
        // Invariant subspace found: continue with a fresh orthogonal direction.
        for (auto& x : w) x = unif(rng);
        for (int pass = 0; pass < 2; ++pass)
          for (int i = 0; i <= j; ++i) {
            const cplx c = cdot(v[i], w);
            for (std::size_t r = 0; r < n; ++r) w[r] -= c * v[i][r];
          }
        normalize(w);
        h(j + 1, j) = 0.0;
        v[j + 1] = w;
      } else {
        h(j + 1, j) = beta;
        for (std::size_t r = 0; r < n; ++r) v[j + 1][r] = w[r] / beta;
      }
    }

    CMatrix hm = h.block(0, 0, m, m);
    EigenDecomposition eig = complex_eigs(hm);
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(eig.values[a]) > std::abs(eig.values[b]);
    });

    // Check the k dominant Ritz pairs against the true operator.
    const cplx beta_last = h(m, m - 1);
    bool all_ok = true;
    double worst = 0.0;
    int converged = 0;
    ArnoldiResult trial;
    trial.basis_size = m;
    trial.iterations = cycle + 1;
    for (int t = 0; t < k; ++t) {
      const int idx = order[t];
      const cplx theta = eig.values[idx];
      if (std::abs(theta) == 0.0) {
        all_ok = false;
        worst = INFINITY;
        continue;
      }
      const double est = std::abs(beta_last * eig.vectors(m - 1, idx));
      const cplx lambda = sigma + 1.0 / theta;
      CVec x(n, 0.0);
      for (int i = 0; i < m; ++i) {
        const cplx yi = eig.vectors(i, idx);
        for (std::size_t r = 0; r < n; ++r) x[r] += yi * v[i][r];
      }
      normalize(x);
      double resid = INFINITY;
      if (est <= 1e-3 * std::abs(theta) || cycle == opt.max_restarts) {
        CVec ax(n);
        op(x, ax);
        if (opt.mass) {
          CVec wx(n);
          opt.mass(x, wx);
          for (std::size_t r = 0; r < n; ++r) ax[r] -= lambda * wx[r];
        } else {
          for (std::size_t r = 0; r < n; ++r) ax[r] -= lambda * x[r];
        }
        resid = norm2(std::span<const cplx>(ax));
      }
      if (resid <= tol) {
        ++converged;
      } else {
        all_ok = false;
      }
      worst = std::max(worst, resid);
      trial.values.push_back(lambda);
      trial.residuals.push_back(resid);
      if (opt.want_vectors) trial.vectors.push_back(std::move(x));
    }
    if (all_ok) {
      std::vector<int> ord(trial.values.size());
      std::iota(ord.begin(), ord.end(), 0);
      std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
        return std::abs(trial.values[a] - sigma) < std::abs(trial.values[b] - sigma);
      });
      for (int i : ord) {
        res.values.push_back(trial.values[i]);
        res.residuals.push_back(trial.residuals[i]);
        if (opt.want_vectors) res.vectors.push_back(std::move(trial.vectors[i]));
      }
      return res;
    }
    if (cycle == opt.max_restarts) {
      throw NotConverged("arnoldi: " + std::to_string(converged) + " of " + std::to_string(k) +
                             " Ritz pairs converged after " + std::to_string(cycle) + " restarts",
                         converged, worst);
    }

    // Thick restart on the span of the wanted Ritz vectors.
    const int keep = std::min(m - 2, k + (m - k) / 2);
    CMatrix q(m, keep);
    int p_new = 0;
    for (int t = 0; t < m && p_new < keep; ++t) {
      CVec y = eig.vectors.column(order[t]);
      for (int pass = 0; pass < 2; ++pass)
        for (int c = 0; c < p_new; ++c) {
          cplx s = 0.0;
          for (int i = 0; i < m; ++i) s += std::conj(q(i, c)) * y[i];
          for (int i = 0; i < m; ++i) y[i] -= s * q(i, c);
        }
      const double ny = norm2(std::span<const cplx>(y));
      if (ny < 1e-8) continue;  // (nearly) repeated Ritz vector
      for (int i = 0; i < m; ++i) q(i, p_new) = y[i] / ny;
      ++p_new;
    }
    q = q.block(0, 0, m, p_new);
    CMatrix qh(p_new, m);
    for (int i = 0; i < m; ++i)
      for (int c = 0; c < p_new; ++c) qh(c, i) = std::conj(q(i, c));
    CMatrix tmat = qh * (hm * q);

    std::vector<CVec> vnew(p_new, CVec(n, 0.0));
    for (int c = 0; c < p_new; ++c)
      for (int i = 0; i < m; ++i) {
        const cplx qi = q(i, c);
        if (qi == cplx(0.0)) continue;
        for (std::size_t r = 0; r < n; ++r) vnew[c][r] += qi * v[i][r];
      }
    CVec vlast = v[m];
    for (int c = 0; c < p_new; ++c) v[c] = std::move(vnew[c]);
    v[p_new] = std::move(vlast);
    h = CMatrix(m + 1, m);
    h.set_block(0, 0, tmat);
    for (int c = 0; c < p_new; ++c) h(p_new, c) = beta_last * q(m - 1, c);
    p = p_new;
  }
  throw NotConverged("arnoldi: restart budget exhausted", 0, INFINITY);
}

ArnoldiResult shift_invert_arnoldi(const CsrMatrix& m, cplx sigma, const ArnoldiOptions& opt) {
  ShiftedSolver solver(m, sigma);
  LinearOp inv = [&](std::span<const cplx> in, std::span<cplx> out) {
    std::copy(in.begin(), in.end(), out.begin());
    solver.solve(out);
  };
  LinearOp op = [&](std::span<const cplx> in, std::span<cplx> out) { m.apply(in, out); };
  return shift_invert_arnoldi(inv, op, sigma, m.rows(), m.norm_inf(), opt);
}

SingularValueEstimate smallest_singular_value(const ShiftedSolver& solver, int max_iter,
                                              double tol) {
  // Lanczos with full reorthogonalization on B = (M^H M)^-1; its largest eigenvalue is
  // 1 / sigma_min^2. Plain power iteration stalls when the two smallest singular values
  // are close, which is the usual case near a conjugate pair.
  const std::size_t n = solver.order();
  const int kmax = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(max_iter), n));
  std::vector<CVec> q{arnoldi_start_vector(n, 42)};
  Vec alpha, beta;
  SingularValueEstimate est;
  double theta = 0.0, resid = 0.0;
  for (int k = 0; k < kmax; ++k) {
    CVec w = q[k];
    solver.solve(w);
    solver.solve_adjoint(w);
    alpha.push_back(cdot(q[k], w).real());
    for (int pass = 0; pass < 2; ++pass)
      for (const CVec& v : q) {
        const cplx c = cdot(v, w);
        for (std::size_t i = 0; i < n; ++i) w[i] -= c * v[i];
      }
    const double b = norm2(std::span<const cplx>(w));
    Matrix t(alpha.size(), alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < alpha.size()) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    const SymmetricEigen e = symmetric_eigen(t, true);
    theta = e.values.back();
    resid = b * std::abs(e.vectors(alpha.size() - 1, alpha.size() - 1));
    est.iterations = k + 1;
    if (resid <= tol * std::abs(theta) || b <= 1e-14 * std::abs(theta)) break;
    beta.push_back(b);
    for (auto& x : w) x /= b;
    q.push_back(std::move(w));
  }
  if (!(theta > 0.0)) throw NoConvergence("smallest_singular_value: nonpositive Rayleigh quotient");
  est.sigma = 1.0 / std::sqrt(theta);
  est.upper = est.sigma;
  est.lower = 1.0 / std::sqrt(theta + resid);
  return est;
}

SingularValueEstimate smallest_singular_value(const CsrMatrix& m, cplx shift) {
  try {
    ShiftedSolver solver(m, shift);
    return smallest_singular_value(solver);
  } catch (const Singular&) {
    return {};
  }
}

}  // namespace kfp
