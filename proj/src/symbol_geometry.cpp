#include "kfp/symbol_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "kfp/dense_linalg.hpp"
#include "kfp/errors.hpp"

namespace kfp {

SymbolSet::SymbolSet(const ModelSpec& model) : model_(&model), b_(model.b()), c_(model.c()) {}

double SymbolSet::p2(std::span<const double> x, std::span<const double> xi) const {
  (void)x;
  return dot(xi, b_.apply(xi));
}

double SymbolSet::p0(std::span<const double> x) const {
  const Vec g = model_->phi.gradient(x);
  return dot(g, b_.apply(std::span<const double>(g)));
}

double SymbolSet::p1(std::span<const double> x, std::span<const double> xi) const {
  return dot(transport(x), xi);
}

double SymbolSet::q(std::span<const double> x, std::span<const double> xi) const {
  return p2(x, xi) + p1(x, xi) - p0(x);
}

double SymbolSet::q_check(std::span<const double> x, std::span<const double> xi) const {
  Vec m(xi.begin(), xi.end());
  for (auto& v : m) v = -v;
  return q(x, m);
}

cplx SymbolSet::p(std::span<const double> x, std::span<const double> xi) const {
  return {p2(x, xi) + p0(x), p1(x, xi)};
}

Vec SymbolSet::transport(std::span<const double> x) const {
  const Vec g = model_->phi.gradient(x);
  Vec c = c_.apply(std::span<const double>(g));
  for (auto& v : c) v *= 2.0;
  return c;
}

CVec fundamental_eigs(const Matrix& a_hess) {
  CVec w = dense_eigenvalues(a_hess);
  double scale = 0.0;
  for (auto z : w) scale = std::max(scale, std::abs(z));
  for (auto z : w) {
    if (std::abs(z.real()) <= 1e-8 * scale) {
      std::ostringstream os;
      os << "eigenvalue " << z.real() << (z.imag() >= 0 ? "+" : "") << z.imag()
         << "i lies on the imaginary axis";
      throw ImaginaryAxisEigenvalue(os.str());
    }
  }
  return w;
}

CVec fundamental_eigs(const ModelSpec& model, const CriticalPoint& cp) {
  return fundamental_eigs(model.a * cp.hessian.matrix);
}

double tr_tilde(std::span<const cplx> lambdas) {
  cplx s = 0.0;
  for (auto l : lambdas) s += (l.real() > 0 ? 2.0 : -2.0) * l;
  return s.real();
}

CVec subprincipal_eigs(std::span<const cplx> lambdas, int degree) {
  const int n = static_cast<int>(lambdas.size());
  if (degree < 0 || degree > n) throw std::invalid_argument("subprincipal_eigs: bad degree");
  cplx neg = 0.0;
  for (auto l : lambdas)
    if (l.real() < 0) neg += l;
  CVec out;
  // m-subsets in lexicographic order
  std::vector<int> pick(degree);
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    cplx s = 0.0;
    for (int j : pick) s += lambdas[j];
    out.push_back(2.0 * (s - neg));
    int i = degree - 1;
    while (i >= 0 && pick[i] == n - degree + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int k = i + 1; k < degree; ++k) pick[k] = pick[k - 1] + 1;
  }
  return out;
}

CVec lattice_steps(std::span<const cplx> lambdas) {
  CVec s;
  for (auto l : lambdas) s.push_back((l.real() > 0 ? 2.0 : -2.0) * l);
  return s;
}

std::vector<LatticeEntry> mu_lattice(std::span<const cplx> lambdas, int degree, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("mu_lattice: radius must be positive");
  const CVec gammas = subprincipal_eigs(lambdas, degree);
  const CVec steps = lattice_steps(lambdas);
  const int n = static_cast<int>(steps.size());
  for (auto s : steps)
    if (!(s.real() > 0)) throw ImaginaryAxisEigenvalue("mu_lattice: lattice step with Re <= 0");

  std::vector<LatticeEntry> raw;
  std::vector<int> nu(n, 0);
  std::function<void(int, int, cplx)> rec = [&](int g, int l, cplx acc) {
    if (l == n) {
      if (std::abs(acc) < radius) {
        if (raw.size() >= 1000000) throw Overflow("mu_lattice: more than 1e6 entries");
        raw.push_back({acc, 1, nu, g, false});
      }
      return;
    }
    for (int k = 0;; ++k) {
      const cplx v = acc + static_cast<double>(k) * steps[l];
      if (v.real() >= radius) break;
      nu[l] = k;
      rec(g, l + 1, v);
    }
    nu[l] = 0;
  };
  for (int g = 0; g < static_cast<int>(gammas.size()); ++g) rec(g, 0, gammas[g]);

  // Merge equal values; distinct representations of one value are flagged.
  std::stable_sort(raw.begin(), raw.end(), [](const LatticeEntry& a, const LatticeEntry& b) {
    return re_desc_im_desc(b.mu, a.mu);
  });
  std::vector<LatticeEntry> out;
  for (auto& e : raw) {
    bool merged = false;
    for (auto& o : out) {
      if (std::abs(o.mu - e.mu) <= 1e-12 * std::max(1.0, std::abs(e.mu))) {
        ++o.multiplicity;
        if (o.gamma_index == e.gamma_index) o.duplicate_representation = true;
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(std::move(e));
  }
  return out;
}

MuLattice build_lattice(const ModelSpec& model, const CriticalPoint& cp, double radius,
                        int max_degree) {
  MuLattice l;
  l.location = cp.location;
  l.index = cp.index;
  l.lambdas = fundamental_eigs(model, cp);
  l.tr_tilde = tr_tilde(l.lambdas);
  l.radius = radius;
  for (int m = 0; m <= max_degree; ++m) {
    l.subprincipal_by_degree[m] = subprincipal_eigs(l.lambdas, m);
    l.lattice_by_degree[m] = mu_lattice(l.lambdas, m, radius);
  }
  return l;
}

CVec lattice_values(const std::vector<MuLattice>& lattices, int degree) {
  CVec out;
  for (const auto& l : lattices) {
    auto it = l.lattice_by_degree.find(degree);
    if (it == l.lattice_by_degree.end()) continue;
    for (const auto& e : it->second)
      for (int k = 0; k < e.multiplicity; ++k) out.push_back(e.mu);
  }
  std::stable_sort(out.begin(), out.end(), [](cplx a, cplx b) { return re_desc_im_desc(b, a); });
  return out;
}

json lattice_to_json(const std::vector<MuLattice>& lattices) {
  json arr = json::array();
  for (const auto& l : lattices) {
    json cp;
    cp["location"] = l.location;
    cp["index"] = l.index;
    json lams = json::array();
    for (auto z : l.lambdas) lams.push_back(complex_to_json(z));
    cp["lambdas"] = lams;
    cp["tr_tilde"] = l.tr_tilde;
    cp["radius"] = l.radius;
    json degrees = json::array();
    for (const auto& [m, entries] : l.lattice_by_degree) {
      json d;
      d["degree"] = m;
      json sub = json::array();
      for (auto z : l.subprincipal_by_degree.at(m)) sub.push_back(complex_to_json(z));
      d["subprincipal"] = sub;
      json ents = json::array();
      for (const auto& e : entries) {
        ents.push_back(json{{"re", e.mu.real()},
                            {"im", e.mu.imag()},
                            {"multiplicity", e.multiplicity},
                            {"nu_vector", e.nu},
                            {"gamma_index", e.gamma_index},
                            {"duplicate_representation", e.duplicate_representation}});
      }
      d["entries"] = ents;
      degrees.push_back(d);
    }
    cp["degrees"] = degrees;
    arr.push_back(cp);
  }
  return arr;
}

Matrix quadratic_symbol(const ModelSpec& model, const CriticalPoint& cp, SymbolChoice symbol) {
  const std::size_t n = model.dim;
  const Matrix& h = cp.hessian.matrix;
  const Matrix b = model.b(), c = model.c();
  const Matrix qxx = -2.0 * (h * b * h);
  const Matrix qxix = 2.0 * (c * h);  // d^2 q / dxi dx
  const double s = symbol == SymbolChoice::q ? 1.0 : -1.0;
  Matrix q(2 * n, 2 * n);
  q.set_block(0, 0, qxx);
  q.set_block(n, n, 2.0 * b);
  q.set_block(n, 0, s * qxix);
  q.set_block(0, n, s * qxix.transpose());
  return q;
}

Matrix hamilton_matrix(const ModelSpec& model, const CriticalPoint& cp, SymbolChoice symbol) {
  const std::size_t n = model.dim;
  const Matrix q = quadratic_symbol(model, cp, symbol);
  // F = J Q with J = [[0, I], [-I, 0]]
  Matrix f(2 * n, 2 * n);
  f.set_block(0, 0, q.block(n, 0, n, n));
  f.set_block(0, n, q.block(n, n, n, n));
  f.set_block(n, 0, -1.0 * q.block(0, 0, n, n));
  f.set_block(n, n, -1.0 * q.block(0, n, n, n));
  return f;
}

namespace {

// Real spectral projector onto eigenvalues with the given sign of Re.
// Matrix sign function by the scaled Newton iteration; avoids eigenvectors so
// repeated eigenvalues are harmless.
Matrix spectral_projector(const Matrix& m, bool positive) {
  const std::size_t n = m.rows();
  Matrix s = m;
  for (int it = 0; it < 100; ++it) {
    const Matrix si = inverse(s);
    const double mu = std::sqrt(std::abs(determinant(si) / determinant(s)));
    const double g = std::pow(mu, 1.0 / static_cast<double>(n));
    Matrix next = 0.5 * (g * s + (1.0 / g) * si);
    const double change = max_abs(next - s);
    s = std::move(next);
    if (change <= 1e-14 * max_abs(s)) break;
  }
  Matrix p = Matrix::identity(n);
  if (positive) p += s; else p -= s;
  return 0.5 * p;
}

// Ratio of extreme singular values of a real matrix.
double inverse_condition(const Matrix& m) {
  const SymmetricEigen e = symmetric_eigen(m.transpose() * m, false);
  if (e.values.back() <= 0.0) return 0.0;
  return std::sqrt(std::max(e.values.front(), 0.0) / e.values.back());
}

}  // namespace

StableForm stable_quadratic_form(const ModelSpec& model, const CriticalPoint& cp,
                                 Direction direction, SymbolChoice symbol) {
  const std::size_t n = model.dim;
  const Matrix f = hamilton_matrix(model, cp, symbol);
  const CVec ev = dense_eigenvalues(f);
  double scale = 0.0;
  for (auto z : ev) scale = std::max(scale, std::abs(z));
  for (auto z : ev)
    if (std::abs(z.real()) <= 1e-8 * scale)
      throw ImaginaryAxisEigenvalue("Hamilton matrix has an eigenvalue on the imaginary axis");

  std::size_t wanted = 0;
  for (auto z : ev)
    if (direction == Direction::outgoing ? z.real() > 0 : z.real() < 0) ++wanted;
  if (wanted != n) throw ImaginaryAxisEigenvalue("invariant subspace has the wrong dimension");
  // Range of the spectral projector; eigenvectors would break down on repeated eigenvalues.
  const Matrix p = spectral_projector(f, direction == Direction::outgoing);
  const SymmetricEigen pe = symmetric_eigen(p * p.transpose(), true);
  Matrix basis(2 * n, n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t i = 0; i < 2 * n; ++i) basis(i, c) = pe.vectors(i, n + c);

  const Matrix x = basis.block(0, 0, n, n);
  const Matrix xi = basis.block(n, 0, n, n);
  if (inverse_condition(x) < 1e-10)
    throw NotAGraph("invariant subspace is not a graph over x");
  const Matrix m = xi * inverse(x);
  StableForm out;
  out.symmetry_defect = max_abs(m - m.transpose()) / std::max(max_abs(m), 1e-300);
  if (out.symmetry_defect > 1e-8)
    throw NotAGraph("invariant subspace is not Lagrangian (asymmetry " +
                    std::to_string(out.symmetry_defect) + ")");
  out.form = QuadraticForm::from(m, true);

  const Matrix q = quadratic_symbol(model, cp, symbol);
  const Matrix& mm = out.form.matrix;
  const Matrix r = q.block(0, 0, n, n) + q.block(0, n, n, n) * mm + mm * q.block(n, 0, n, n) +
                   mm * q.block(n, n, n, n) * mm;
  out.eikonal_residual = max_abs(symmetric_part(r)) / std::max(max_abs(q), 1e-300);
  return out;
}

namespace {

// (1/T) int_0^T exp(t M)^T exp(t M) dt by a fourth-order Taylor step
// propagator and composite Simpson quadrature.
Matrix time_averaged_gram(const Matrix& m, double horizon, int steps) {
  const std::size_t n = m.rows();
  if (steps % 2) ++steps;
  const double dt = horizon / steps;
  const Matrix hm = dt * m;
  Matrix step = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k <= 4; ++k) {
    term = (1.0 / k) * (term * hm);
    step += term;
  }
  Matrix e = Matrix::identity(n);
  Matrix acc(n, n);
  for (int k = 0; k <= steps; ++k) {
    const double w = (k == 0 || k == steps) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * (e.transpose() * e);
    e = step * e;
  }
  return (dt / 3.0 / horizon) * acc;
}


}  // namespace

LyapunovForm lyapunov_form(const Matrix& m, double horizon, bool normalize, int steps) {
  const CVec lam = fundamental_eigs(m);
  double min_re = INFINITY;
  for (auto z : lam) min_re = std::min(min_re, std::abs(z.real()));
  LyapunovForm out;
  out.horizon = horizon > 0 ? horizon : 5.0 / min_re;
  const std::size_t n = m.rows();
  bool any_pos = false, any_neg = false;
  for (auto z : lam) (z.real() > 0 ? any_pos : any_neg) = true;

  Matrix g(n, n);
  if (any_pos) {
    const Matrix p = spectral_projector(m, true);
    Matrix gp = p.transpose() * time_averaged_gram(m, out.horizon, steps) * p;
    if (normalize) gp = (1.0 / max_abs(gp)) * gp;
    g += gp;
  }
  if (any_neg) {
    const Matrix p = spectral_projector(m, false);
    Matrix gm = p.transpose() * time_averaged_gram(-1.0 * m, out.horizon, steps) * p;
    if (normalize) gm = (1.0 / max_abs(gm)) * gm;
    g -= gm;
  }
  out.g = QuadraticForm::from(symmetric_part(g), true);
  const Matrix deriv = out.g.matrix * m + m.transpose() * out.g.matrix;
  out.certificate = symmetric_eigen(symmetric_part(deriv), false).values.front();
  return out;
}

EscapeForm escape_form(const ModelSpec& model, const CriticalPoint& cp) {
  const std::size_t n = model.dim;
  const Matrix& h = cp.hessian.matrix;
  const Matrix b = model.b(), c = model.c();
  EscapeForm out;
  out.g = lyapunov_form(model.a * h);
  out.g_tilde = lyapunov_form(h * model.a);

  // Quadratic part of p at (U, 0): Re = x^T HBH x + xi^T B xi, Im = 2 xi^T C H x.
  Matrix qr(2 * n, 2 * n), qi(2 * n, 2 * n);
  qr.set_block(0, 0, h * b * h);
  qr.set_block(n, n, b);
  const Matrix ch = c * h;
  qi.set_block(n, 0, ch);
  qi.set_block(0, n, ch.transpose());
  // H_G w = (dG/dxi, -dG/dx) = L w
  Matrix l(2 * n, 2 * n);
  l.set_block(0, n, 2.0 * out.g_tilde.g.matrix);
  l.set_block(n, 0, -2.0 * out.g.g.matrix);

  constexpr double c0 = 100.0;
  for (int k = 1; k <= 20; ++k) {
    const double eps = std::ldexp(1.0, -k);
    Matrix r = qr - eps * (qi * l + l.transpose() * qi) - (eps * eps) * (l.transpose() * qr * l);
    for (std::size_t i = 0; i < 2 * n; ++i) r(i, i) -= eps / c0;
    const double lo = symmetric_eigen(symmetric_part(r), false).values.front();
    if (lo >= -1e-14 * std::max(1.0, max_abs(r))) {
      out.epsilon_star = eps;
      out.margin = lo;
      return out;
    }
  }
  throw NoPositiveEpsilon("no epsilon in {2^-k : k = 1..20} certifies the escape inequality");
}

}  // namespace kfp
