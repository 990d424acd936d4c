#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "kfp/banded.hpp"
#include "kfp/dense.hpp"
#include "kfp/sparse.hpp"

namespace kfp {

/// Band copy of m - sigma * mass (mass = identity when null).
BandedMatrix to_banded(const CsrMatrix& m, double sigma = 0.0, const CsrMatrix* mass = nullptr);

/// Real band matrix of order 2n representing m - sigma * mass over the complex
/// numbers; unknowns interleaved as (re_0, im_0, re_1, im_1, ...).
BandedMatrix to_banded_embedded(const CsrMatrix& m, cplx sigma, const CsrMatrix* mass = nullptr);

/// Factorization of (M - sigma W) for a real sparse M, real or complex sigma.
class ShiftedSolver {
 public:
  ShiftedSolver(const CsrMatrix& m, cplx sigma, const CsrMatrix* mass = nullptr);

  std::size_t order() const { return n_; }
  cplx shift() const { return sigma_; }
  bool complex_shift() const { return complex_; }

  void solve(std::span<cplx> b) const;            ///< (M - sigma W) x = b
  void solve_transpose(std::span<cplx> b) const;  ///< (M - sigma W)^T x = b
  void solve_adjoint(std::span<cplx> b) const;    ///< (M - sigma W)^H x = b
  void solve(std::span<double> b) const;          ///< real shift only

 private:
  std::size_t n_;
  cplx sigma_;
  bool complex_;
  std::optional<BandedLU> lu_;
  mutable std::vector<double> work_;
};

using LinearOp = std::function<void(std::span<const cplx> in, std::span<cplx> out)>;

struct ArnoldiOptions {
  int wanted = 6;         ///< k
  int basis = 0;          ///< m; 0 means 2k + 8
  int max_restarts = 40;
  double tol = 1e-8;      ///< residual bound relative to op_norm
  std::uint64_t seed = 42;
  bool want_vectors = false;
  /// Generalized problem M v = lambda W v: residuals use |M v - lambda W v|.
  std::function<void(std::span<const cplx>, std::span<cplx>)> mass;
};

struct ArnoldiResult {
  CVec values;                 ///< nearest the shift first
  std::vector<CVec> vectors;   ///< unit-norm Ritz vectors, if requested
  Vec residuals;               ///< ||M v - lambda v|| / ||v|| against the original operator
  int iterations = 0;          ///< restart cycles used
  int basis_size = 0;
};

/// Shift-invert Arnoldi with thick restarts. `inverse` applies (M - sigma)^{-1}
/// (possibly composed with a projector), `op` applies M for residuals.
ArnoldiResult shift_invert_arnoldi(const LinearOp& inverse, const LinearOp& op, cplx sigma,
                                   std::size_t n, double op_norm, const ArnoldiOptions& opt,
                                   std::span<const cplx> start = {});

/// Convenience overload for a plain sparse matrix.
ArnoldiResult shift_invert_arnoldi(const CsrMatrix& m, cplx sigma, const ArnoldiOptions& opt);

struct SingularValueEstimate {
  double sigma = 0.0;  ///< estimate of the smallest singular value
  double lower = 0.0;  ///< bracket from the Rayleigh quotient and its residual
  double upper = 0.0;
  int iterations = 0;
};

/// Lanczos on x -> solve(M^H, solve(M, x)), at most max_iter steps, stopping once the
/// Ritz residual is below tol times the Ritz value.
SingularValueEstimate smallest_singular_value(const ShiftedSolver& solver, int max_iter = 200,
                                              double tol = 1e-10);

/// Same for a sparse matrix; returns zero when the factorization is singular.
SingularValueEstimate smallest_singular_value(const CsrMatrix& m, cplx shift = 0.0);

/// Deterministic start vector: normalized all-ones plus a seeded 1e-3 perturbation.
CVec arnoldi_start_vector(std::size_t n, std::uint64_t seed);

}  // namespace kfp
