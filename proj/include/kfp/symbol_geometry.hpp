#pragma once

#include <map>
#include <span>
#include <vector>

#include "kfp/json_io.hpp"
#include "kfp/landscape.hpp"
#include "kfp/model.hpp"
#include "kfp/quadratic_form.hpp"

namespace kfp {

/// Classical symbols of the Witten Laplacian attached to (phi, A).
class SymbolSet {
 public:
  explicit SymbolSet(const ModelSpec& model);

  double p2(std::span<const double> x, std::span<const double> xi) const;
  double p0(std::span<const double> x) const;
  double p1(std::span<const double> x, std::span<const double> xi) const;
  double q(std::span<const double> x, std::span<const double> xi) const;
  double q_check(std::span<const double> x, std::span<const double> xi) const;
  cplx p(std::span<const double> x, std::span<const double> xi) const;
  /// Transport field c(x) = 2 C phi'(x).
  Vec transport(std::span<const double> x) const;

  const ModelSpec& model() const { return *model_; }
  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }

 private:
  const ModelSpec* model_;
  Matrix b_, c_;
};

/// Eigenvalues of A phi''(U), ordered by descending real part then imaginary part.
CVec fundamental_eigs(const ModelSpec& model, const CriticalPoint& cp);
CVec fundamental_eigs(const Matrix& a_hess);

double tr_tilde(std::span<const cplx> lambdas);

/// 2 (lambda_{j1} + ... + lambda_{jm} - sum over Re lambda < 0), one value per m-subset.
CVec subprincipal_eigs(std::span<const cplx> lambdas, int degree);

/// 2 sign(Re lambda) lambda
CVec lattice_steps(std::span<const cplx> lambdas);

struct LatticeEntry {
  cplx mu;
  int multiplicity = 1;
  std::vector<int> nu;
  int gamma_index = 0;
  bool duplicate_representation = false;
};

/// gamma + sum nu_l lambda_hat_l with |.| < radius, merged by value (1e-12).
std::vector<LatticeEntry> mu_lattice(std::span<const cplx> lambdas, int degree, double radius);

struct MuLattice {
  Vec location;
  int index = 0;
  CVec lambdas;
  double tr_tilde = 0.0;
  std::map<int, CVec> subprincipal_by_degree;
  std::map<int, std::vector<LatticeEntry>> lattice_by_degree;
  double radius = 0.0;
};

MuLattice build_lattice(const ModelSpec& model, const CriticalPoint& cp, double radius,
                        int max_degree);

/// Flattened multiset of lattice values over several critical points for one degree.
CVec lattice_values(const std::vector<MuLattice>& lattices, int degree);

json lattice_to_json(const std::vector<MuLattice>& lattices);

enum class Direction { outgoing, incoming };
enum class SymbolChoice { q, q_check };

/// Hamilton matrix of the quadratic part of q (or q_check) at (U, 0).
Matrix hamilton_matrix(const ModelSpec& model, const CriticalPoint& cp, SymbolChoice symbol);
/// Symmetric 2n x 2n matrix Q with q_quad(w) = w^T Q w / 2.
Matrix quadratic_symbol(const ModelSpec& model, const CriticalPoint& cp, SymbolChoice symbol);

struct StableForm {
  QuadraticForm form;              ///< phi_+'' (outgoing) or phi_-'' (incoming)
  double symmetry_defect = 0.0;    ///< |M - M^T| / |M| before symmetrization
  double eikonal_residual = 0.0;   ///< relative to |Q|
};

StableForm stable_quadratic_form(const ModelSpec& model, const CriticalPoint& cp,
                                 Direction direction, SymbolChoice symbol);

struct LyapunovForm {
  QuadraticForm g;
  double certificate = 0.0;  ///< min over |x| = 1 of x^T (G M + M^T G) x
  double horizon = 0.0;      ///< T used in the time average
};

/// Time-averaged Lyapunov form G = G_+ P_+ - G_- P_- for the flow x' = M x.
/// T <= 0 selects 5 / min |Re lambda(M)|. Each block is scaled to unit norm
/// unless `normalize` is false.
LyapunovForm lyapunov_form(const Matrix& m, double horizon = 0.0, bool normalize = true,
                           int steps = 4000);

struct EscapeForm {
  LyapunovForm g;        ///< on x, for A phi''
  LyapunovForm g_tilde;  ///< on xi, for phi'' A
  double epsilon_star = 0.0;
  double margin = 0.0;   ///< min eigenvalue of the certified form at epsilon_star
};

EscapeForm escape_form(const ModelSpec& model, const CriticalPoint& cp);

}  // namespace kfp
