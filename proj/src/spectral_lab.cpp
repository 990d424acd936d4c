#include "kfp/spectral_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kfp/dense_linalg.hpp"
#include "kfp/eigen_kernel.hpp"
#include "kfp/errors.hpp"

namespace kfp {

DiscreteComplex complex_for_h(const ModelSpec& model, double h, const LabGridOptions& opt,
                              bool with_degree1) {
  const GridSpec g = adapted_grid(model, h, opt.resolution, opt.tail, opt.max_half_width);
  return assemble_complex(g, model, h, with_degree1, opt.stabilization);
}

CVec SpectrumResult::scaled() const {
  CVec out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v.value / h);
  return out;
}

namespace {

struct Problem {
  const CsrMatrix* m;
  const CsrMatrix* mass;  // null for the standard problem
  const Vec* deflate;     // unit vector projected out, or null
};

ArnoldiResult run_shift(const Problem& p, cplx sigma, int count, const SpectrumOptions& opt) {
  const std::size_t n = p.m->rows();
  ShiftedSolver solver(*p.m, sigma, p.mass);
  auto project = [&](std::span<cplx> x) {
    if (!p.deflate) return;
    const Vec& m = *p.deflate;
    cplx s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += m[i] * x[i];
    for (std::size_t i = 0; i < n; ++i) x[i] -= s * m[i];
  };
  LinearOp inverse = [&](std::span<const cplx> in, std::span<cplx> out) {
    if (p.mass) {
      p.mass->apply(in, out);
    } else {
      std::copy(in.begin(), in.end(), out.begin());
    }
    project(out);
    solver.solve(out);
    project(out);
  };
  LinearOp op = [&](std::span<const cplx> in, std::span<cplx> out) { p.m->apply(in, out); };
  ArnoldiOptions ao;
  ao.wanted = count;
  ao.basis = opt.basis > 0 ? std::max(opt.basis, 2 * count + 8) : 2 * count + 8;
  ao.tol = opt.tol;
  ao.want_vectors = opt.want_vectors;
  ao.seed = opt.seed;
  if (p.mass) ao.mass = [&](std::span<const cplx> in, std::span<cplx> out) { p.mass->apply(in, out); };
  CVec start = arnoldi_start_vector(n, ao.seed);
  project(start);
  return shift_invert_arnoldi(inverse, op, sigma, n, p.m->norm_inf(), ao, start);
}

}  // namespace

SpectrumResult low_spectrum(const DiscreteComplex& c, int degree, const SpectrumOptions& opt) {
  if (degree != 0 && degree != 1) throw std::invalid_argument("low_spectrum: degree must be 0 or 1");
  if (opt.shifts.empty() || opt.shifts.front().imag() != 0.0)
    throw std::invalid_argument("low_spectrum: the first shift must be real");
  if (degree == 1 && c.lap1_k.rows() == 0)
    throw std::invalid_argument("low_spectrum: complex assembled without degree 1");

  SpectrumResult r;
  r.h = c.h;
  r.degree = degree;
  r.grid = c.grid;
  r.stabilization = c.stabilization;
  const Problem p = degree == 0 ? Problem{&c.lap0, nullptr, &c.maxwellian}
                                : Problem{&c.lap1_k, &c.w1, nullptr};
  r.deflated = degree == 0;
  r.op_norm = p.m->norm_inf();
  const double h = c.h;
  const std::size_t n = p.m->rows();
  const int cap = static_cast<int>(std::min<std::size_t>(opt.max_count, (n - 1) / 3));

  // Values of one run are distinct eigenpairs even when nearly equal (tunnelling
  // doublets); merging only happens across runs.
  const double tiny = opt.dedupe * h;
  std::vector<SpectralValue> kept;
  auto absorb = [&](const ArnoldiResult& a) {
    std::vector<SpectralValue> run;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      SpectralValue v{a.values[i], a.residuals[i], false, {}};
      if (opt.want_vectors) v.vector = a.vectors[i];
      run.push_back(std::move(v));
    }
    // real operator: an unpaired nonreal value gets its conjugate, an exact eigenpair
    // with the same residual
    const std::size_t computed = run.size();
    std::vector<bool> paired(computed, false);
    for (std::size_t i = 0; i < computed; ++i) {
      if (paired[i] || std::abs(run[i].value.imag()) <= tiny) continue;
      std::size_t best = computed;
      for (std::size_t j = 0; j < computed; ++j) {
        if (j == i || paired[j]) continue;
        const double d = std::abs(run[j].value - std::conj(run[i].value));
        if (d <= tiny + 10.0 * (run[i].residual + run[j].residual) &&
            (best == computed || d < std::abs(run[best].value - std::conj(run[i].value))))
          best = j;
      }
      paired[i] = true;
      if (best < computed) {
        paired[best] = true;
        continue;
      }
      SpectralValue v = run[i];
      v.value = std::conj(v.value);
      for (auto& x : v.vector) x = std::conj(x);
      run.push_back(std::move(v));
    }
    const std::size_t before = kept.size();
    for (auto& v : run) {
      if (std::abs(v.value) >= opt.window * h) continue;
      const bool dup = std::any_of(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(before),
                                   [&](const SpectralValue& k) { return std::abs(k.value - v.value) <= tiny; });
      if (!dup) kept.push_back(std::move(v));
    }
  };

  // real shift, grown until the window disc is inside the computed disc around sigma
  const cplx sigma0 = opt.shifts.front() * h;
  int count = std::min(opt.count, cap);
  for (;;) {
    const ArnoldiResult a = run_shift(p, sigma0, count, opt);
    double reach = 0.0;
    for (const cplx& z : a.values) reach = std::max(reach, std::abs(z - sigma0));
    r.window_covered = reach >= opt.window * h + std::abs(sigma0);
    if (r.window_covered || !opt.cover_window || count >= cap) {
      absorb(a);
      break;
    }
    count = std::min(cap, count + 8);
  }
  for (std::size_t s = 1; s < opt.shifts.size(); ++s) absorb(run_shift(p, opt.shifts[s] * h, std::min(opt.count, cap), opt));

  if (degree == 0) kept.push_back({cplx(0.0), 0.0, true, {}});
  std::stable_sort(kept.begin(), kept.end(), [](const SpectralValue& a, const SpectralValue& b) {
    if (std::abs(a.value) != std::abs(b.value)) return std::abs(a.value) < std::abs(b.value);
    return a.value.imag() < b.value.imag();
  });

  for (const auto& v : kept)
    if (!v.deflated && !(v.residual <= 1e-8 * r.op_norm))
      throw ResidualTooLarge("low_spectrum: kept value with residual " + std::to_string(v.residual));

  r.accretive = std::all_of(kept.begin(), kept.end(),
                            [&](const SpectralValue& v) { return v.value.real() >= -1e-8 * r.op_norm; });
  r.conjugate_closed = std::all_of(kept.begin(), kept.end(), [&](const SpectralValue& v) {
    if (std::abs(v.value.imag()) <= tiny) return true;
    return std::any_of(kept.begin(), kept.end(), [&](const SpectralValue& w) {
      return std::abs(w.value - std::conj(v.value)) <= tiny + 10.0 * (v.residual + w.residual);
    });
  });
  r.values = std::move(kept);
  return r;
}

int window_violations(const SpectrumResult& s, double window, double d) {
  int bad = 0;
  for (const auto& v : s.values)
    if (v.value.real() < window * s.h && std::abs(v.value.imag()) > d * s.h) ++bad;
  return bad;
}

double default_imaginary_bound(std::span<const cplx> lattice) {
  double m = 0.0;
  for (const cplx& z : lattice) m = std::max(m, std::abs(z.imag()));
  return 4.0 * m + 1.0;
}

LatticeMatch match_lattice(std::span<const cplx> computed, std::span<const cplx> lattice) {
  struct Cand {
    double d;
    std::size_t i, j;
  };
  std::vector<Cand> cands;
  cands.reserve(computed.size() * lattice.size());
  for (std::size_t i = 0; i < computed.size(); ++i)
    for (std::size_t j = 0; j < lattice.size(); ++j) cands.push_back({std::abs(computed[i] - lattice[j]), i, j});
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });
  std::vector<bool> used_c(computed.size(), false), used_l(lattice.size(), false);
  LatticeMatch m;
  for (const auto& c : cands) {
    if (used_c[c.i] || used_l[c.j]) continue;
    used_c[c.i] = used_l[c.j] = true;
    m.pairs.push_back({computed[c.i], lattice[c.j], c.d});
    m.max_deviation = std::max(m.max_deviation, c.d);
  }
  for (std::size_t i = 0; i < computed.size(); ++i)
    if (!used_c[i]) m.unmatched_computed.push_back(computed[i]);
  for (std::size_t j = 0; j < lattice.size(); ++j)
    if (!used_l[j]) m.unmatched_lattice.push_back(lattice[j]);
  return m;
}

CVec lattice_multiset(const ModelSpec& model, double radius) {
  std::vector<MuLattice> lat;
  for (const auto& cp : find_critical_points(model)) lat.push_back(build_lattice(model, cp, radius, 0));
  return lattice_values(lat, 0);
}

double splitting_value(const DiscreteComplex& c, const SpectrumOptions& opt) {
  SpectrumOptions o = opt;
  o.cover_window = false;
  o.count = std::max(2, std::min(opt.count, 4));
  o.window = 1e300;
  o.shifts = {opt.shifts.empty() ? cplx(-0.1) : opt.shifts.front()};
  const SpectrumResult s = low_spectrum(c, 0, o);
  const SpectralValue* first = nullptr;
  for (const auto& v : s.values)
    if (!v.deflated) {
      first = &v;
      break;
    }
  if (!first) throw ComplexSplitting("splitting_value: no nonzero eigenvalue computed");
  const cplx mu = first->value;
  if (std::abs(mu.imag()) > 1e-8 * std::abs(mu) || !(mu.real() > 0))
    throw ComplexSplitting("splitting_value: smallest nonzero eigenvalue is not real positive");
  return mu.real();
}

SplittingFit fit_splitting(std::vector<SplittingPoint> table, bool strict) {
  if (table.size() < 5) throw BadFit("fit_splitting: need at least 5 points");
  std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) { return a.h < b.h; });
  const double n = static_cast<double>(table.size());
  double sx = 0, sy = 0;
  for (const auto& p : table) {
    if (!(p.mu1 > 0) || !(p.h > 0)) throw BadFit("fit_splitting: mu1 and h must be positive");
    sx += 1.0 / p.h;
    sy += std::log(p.mu1) - std::log(p.h);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : table) {
    const double dx = 1.0 / p.h - mx, dy = std::log(p.mu1) - std::log(p.h) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  SplittingFit f;
  const double beta = sxy / sxx;
  f.slope = -beta;
  f.prefactor = std::exp(my - beta * mx);
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  f.passed = f.r2 >= 0.999;
  f.table = std::move(table);
  if (strict && !f.passed) throw BadFit("fit_splitting: R^2 = " + std::to_string(f.r2) + " below 0.999");
  return f;
}

namespace {

Vec real_eigenvector(const Matrix& m, double& eigenvalue) {
  const EigenDecomposition e = dense_eigs(m, true);
  int neg = -1;
  for (std::size_t k = 0; k < e.values.size(); ++k)
    if (e.values[k].real() < 0) {
      if (neg >= 0) throw SignViolation("saddle: more than one negative direction");
      neg = static_cast<int>(k);
    }
  if (neg < 0 || std::abs(e.values[neg].imag()) > 1e-12 * std::abs(e.values[neg]))
    throw SignViolation("saddle: no simple real negative eigenvalue");
  eigenvalue = e.values[neg].real();
  CVec z = e.vectors.column(neg);
  // remove the arbitrary phase
  std::size_t big = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (std::abs(z[i]) > std::abs(z[big])) big = i;
  const cplx ph = std::abs(z[big]) / z[big];
  Vec v(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) v[i] = (z[i] * ph).real();
  scale(v, 1.0 / norm2(v));
  return v;
}

// Orthonormal basis of the complement of unit t, as columns.
Matrix complement_basis(const Vec& t) {
  const std::size_t n = t.size();
  Matrix q(n, n - 1);
  std::size_t col = 0;
  for (std::size_t e = 0; e < n && col < n - 1; ++e) {
    Vec v(n, 0.0);
    v[e] = 1.0;
    const double s = dot(v, t);
    axpy(-s, t, v);
    for (std::size_t c = 0; c < col; ++c) {
      const Vec qc = q.column(c);
      axpy(-dot(v, qc), qc, v);
    }
    const double nv = norm2(v);
    if (nv < 1e-6) continue;
    scale(v, 1.0 / nv);
    q.set_column(col++, v);
  }
  return q;
}

struct CurvePoint {
  Vec x;
  Vec tangent;
};

// Follows the stable curve of x' = 2 M phi'(x) at the saddle backwards in time, from
// the side of `toward`, until it is `radius` away from the saddle.
CurvePoint follow_incoming(const ModelSpec& model, const Matrix& m, const Vec& saddle, const Vec& dir,
                           const Vec& toward, double radius, double trust) {
  if (radius > trust)
    throw CurveEscapesQuadraticRegion("cutoff radius " + std::to_string(radius) + " exceeds the trust radius " +
                                      std::to_string(trust));
  const std::size_t n = saddle.size();
  Vec v = dir;
  if (dot(v, toward) < 0) scale(v, -1.0);
  auto field = [&](const Vec& x) {
    const Vec g = model.phi.gradient(x);
    Vec f = m.apply(g);
    scale(f, -2.0);
    return f;
  };
  const double start = std::min(1e-6, 1e-3 * radius);
  Vec x = saddle;
  axpy(start, v, x);
  auto dist = [&](const Vec& p) { return norm2(p - saddle); };
  // RK4 in arc length, step bounded by radius / 2000
  const double ds = radius / 2000.0;
  for (int it = 0; it < 400000; ++it) {
    const double d0 = dist(x);
    auto unit = [&](const Vec& p) {
      Vec f = field(p);
      const double nf = norm2(f);
      if (!(nf > 0)) throw CurveEscapesQuadraticRegion("incoming curve stalls at a critical point");
      scale(f, 1.0 / nf);
      return f;
    };
    const Vec k1 = unit(x);
    const Vec k2 = unit(x + (0.5 * ds) * k1);
    const Vec k3 = unit(x + (0.5 * ds) * k2);
    const Vec k4 = unit(x + ds * k3);
    Vec nx = x;
    for (std::size_t i = 0; i < n; ++i) nx[i] += ds / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    const double d1 = dist(nx);
    if (d1 < d0) throw CurveEscapesQuadraticRegion("incoming curve turns back towards the saddle");
    if (d1 >= radius) {
      // linear interpolation onto the sphere
      const double t = (radius - d0) / (d1 - d0);
      Vec p = x;
      for (std::size_t i = 0; i < n; ++i) p[i] += t * (nx[i] - x[i]);
      return {p, unit(p)};
    }
    x = std::move(nx);
  }
  throw CurveEscapesQuadraticRegion("incoming curve did not reach the cutoff radius");
}

struct Leading {
  double ell;
  Vec tangent;
  double det;
};

Leading leading_coefficient(const ModelSpec& model, const Matrix& m, const Vec& amplitude,
                            const Matrix& outgoing, const Vec& saddle, const Vec& neg_dir, const Vec& well,
                            double c0, double radius, double trust) {
  const std::size_t n = saddle.size();
  const CurvePoint cp = follow_incoming(model, m, saddle, neg_dir, well - saddle, radius, trust);
  // transverse Hessian of phi_+^(*) + phi at the cutoff point
  Matrix hess = model.phi.hessian(cp.x) + outgoing;
  const Matrix q = complement_basis(cp.tangent);
  const Matrix mt = q.transpose() * hess * q;
  const double det = n == 1 ? 1.0 : determinant(mt);
  if (!(det > 0)) throw CurveEscapesQuadraticRegion("transverse Hessian is not positive at the cutoff radius");
  const Vec ma = m.apply(amplitude);
  // the cutoff drops by one along the curve towards the well
  const double ell = c0 * dot(ma, cp.tangent) * std::pow(2.0 * M_PI, 0.5 * static_cast<double>(n - 1)) / std::sqrt(det);
  return {ell, cp.tangent, det};
}

InteractionData predict_at(const ModelSpec& model, const WellStructure& w, double radius) {
  const std::size_t n = static_cast<std::size_t>(model.dim);
  const Matrix& a = model.a;
  const Matrix at = a.transpose();
  const Matrix& h0 = w.saddle.hessian.matrix;
  const Vec& u0 = w.saddle.location;

  InteractionData d;
  d.cutoff_radius = radius;
  d.phi_plus = stable_quadratic_form(model, w.saddle, Direction::outgoing, SymbolChoice::q).form.matrix;
  d.phi_plus_star = stable_quadratic_form(model, w.saddle, Direction::outgoing, SymbolChoice::q_check).form.matrix;

  double lam = 0.0, lam_star = 0.0;
  d.a00 = real_eigenvector(h0 * at, lam);
  d.a00_star = real_eigenvector(h0 * a, lam_star);
  d.negative_eigenvalue = lam;
  // directions of the incoming curves: A a00* for A, A^T a00 for A^T
  Vec dir = a.apply(d.a00_star), dir_star = at.apply(d.a00);
  scale(dir, 1.0 / norm2(dir));
  scale(dir_star, 1.0 / norm2(dir_star));

  const Matrix sum = d.phi_plus + d.phi_plus_star;
  const double gauss = std::pow(2.0 * M_PI, 0.5 * static_cast<double>(n)) / std::sqrt(determinant(sum));
  const double raw_pairing = dot(a.apply(d.a00_star), d.a00) * gauss;
  if (std::abs(raw_pairing) < 1e-12) throw SignViolation("saddle amplitudes are A-orthogonal");
  scale(d.a00_star, 1.0 / raw_pairing);
  d.pairing = dot(a.apply(d.a00_star), d.a00) * gauss;

  const double trust = 0.5 * std::min(norm2(w.minus.location - u0), norm2(w.plus.location - u0));
  d.total = 0.0;
  for (int j : {-1, 1}) {
    const CriticalPoint& well = w.well(j);
    WellInteraction wi;
    wi.well = j;
    wi.action = w.action(j);
    wi.c0 = std::pow(determinant(well.hessian.matrix), 0.25) / std::pow(M_PI, 0.25 * static_cast<double>(n));
    const Leading l = leading_coefficient(model, a, d.a00_star, d.phi_plus_star, u0, dir, well.location,
                                          wi.c0, radius, trust);
    const Leading ls = leading_coefficient(model, at, d.a00, d.phi_plus, u0, dir_star, well.location,
                                           wi.c0, radius, trust);
    wi.ell = l.ell;
    wi.tangent = l.tangent;
    wi.transverse_det = l.det;
    wi.ell_star = ls.ell;
    wi.tangent_star = ls.tangent;
    wi.transverse_det_star = ls.det;
    wi.a0 = wi.ell * wi.ell_star;
    if (!(wi.a0 > 0)) throw SignViolation("interaction coefficients have opposite signs for well " + std::to_string(j));
    d.total += wi.a0;
    d.wells.push_back(std::move(wi));
  }
  return d;
}

}  // namespace

InteractionData predict_prefactor(const ModelSpec& model, const WellStructure& wells, double cutoff_radius) {
  if (!(cutoff_radius > 0)) throw std::invalid_argument("cutoff radius must be positive");
  InteractionData d = predict_at(model, wells, cutoff_radius);
  const InteractionData half = predict_at(model, wells, 0.5 * cutoff_radius);
  d.total_half_radius = half.total;
  d.sensitivity = std::abs(half.total - d.total) / d.total;
  return d;
}

json InteractionData::to_json() const {
  json j;
  j["cutoff_radius"] = cutoff_radius;
  j["negative_eigenvalue"] = negative_eigenvalue;
  j["phi_plus"] = matrix_to_json(phi_plus);
  j["phi_plus_star"] = matrix_to_json(phi_plus_star);
  j["a00"] = a00;
  j["a00_star"] = a00_star;
  j["pairing"] = pairing;
  json arr = json::array();
  for (const auto& w : wells) {
    json e;
    e["well"] = w.well;
    e["action"] = w.action;
    e["c0"] = w.c0;
    e["tangent"] = w.tangent;
    e["tangent_star"] = w.tangent_star;
    e["transverse_det"] = w.transverse_det;
    e["transverse_det_star"] = w.transverse_det_star;
    e["ell"] = w.ell;
    e["ell_star"] = w.ell_star;
    e["a0"] = w.a0;
    arr.push_back(std::move(e));
  }
  j["wells"] = std::move(arr);
  j["total"] = total;
  j["total_half_radius"] = total_half_radius;
  j["sensitivity"] = sensitivity;
  return j;
}

CVec default_probes(double h, double radius, int count) {
  CVec z;
  for (int k = 0; k < count; ++k) {
    const double ang = (22.5 + 45.0 * k) * M_PI / 180.0;
    z.push_back(std::polar(radius * h, ang));
  }
  return z;
}

std::vector<ResolventPoint> resolvent_probe(const DiscreteComplex& c, std::span<const cplx> z,
                                            std::span<const cplx> spectrum, double proximity) {
  std::vector<ResolventPoint> out;
  for (const cplx& p : z) {
    for (const cplx& s : spectrum)
      if (std::abs(p - s) < c.h / proximity)
        throw std::invalid_argument("resolvent_probe: probe point within h/C of the computed spectrum");
    const ShiftedSolver solver(c.lap0, p);
    const SingularValueEstimate e = smallest_singular_value(solver);
    ResolventPoint r;
    r.z = p;
    r.sigma_min = e.sigma;
    r.norm = 1.0 / e.sigma;
    r.scaled = c.h * r.norm;
    out.push_back(r);
  }
  return out;
}

LocalizationReport localization_check(const DiscreteComplex& c, const WellStructure& w,
                                      std::span<const cplx> degree0, std::span<const cplx> degree1,
                                      double epsilon0, double ball) {
  LocalizationReport rep;
  const Vec& u0 = w.saddle.location;
  if (!degree0.empty()) {
    if (degree0.size() != c.nodes.size()) throw std::invalid_argument("degree-0 vector has the wrong size");
    // drop the global phase
    std::size_t big = 0;
    for (std::size_t i = 0; i < degree0.size(); ++i)
      if (std::abs(degree0[i]) > std::abs(degree0[big])) big = i;
    const cplx ph = std::abs(degree0[big]) / degree0[big];
    const double level = w.saddle.value - epsilon0;
    for (int j : {-1, 1}) {
      const Vec side = w.well(j).location - u0;
      double vf = 0, vv = 0, ff = 0;
      for (std::size_t p = 0; p < c.nodes.size(); ++p) {
        const Vec x = c.nodes.position(p);
        if (dot(x - u0, side) <= 0) continue;
        const double v = (degree0[p] * ph).real();
        const double f = c.node_phi[p] < level ? c.maxwellian[p] : 0.0;
        vf += v * f;
        vv += v * v;
        ff += f * f;
      }
      const double overlap = vv > 0 && ff > 0 ? std::abs(vf) / std::sqrt(vv * ff) : 0.0;
      (j < 0 ? rep.overlap_minus : rep.overlap_plus) = overlap;
    }
    rep.degree0_passed = rep.overlap_minus >= 0.9 && rep.overlap_plus >= 0.9;
  }
  if (!degree1.empty()) {
    if (degree1.size() != c.edges.size()) throw std::invalid_argument("degree-1 vector has the wrong size");
    double in = 0, all = 0;
    for (std::size_t e = 0; e < c.edges.size(); ++e) {
      const double m = std::norm(degree1[e]);
      all += m;
      if (norm2(c.edges.position(e) - u0) < ball) in += m;
    }
    rep.saddle_fraction = all > 0 ? in / all : 0.0;
    rep.degree1_passed = rep.saddle_fraction >= 0.9;
  }
  return rep;
}

std::string spectrum_csv(const std::vector<SpectrumResult>& spectra, const std::vector<LatticeMatch>& matches) {
  std::ostringstream os;
  os.precision(17);
  os << "h,degree,re,im,residual,matched_mu_re,matched_mu_im,deviation\n";
  for (std::size_t s = 0; s < spectra.size(); ++s) {
    const SpectrumResult& r = spectra[s];
    const LatticeMatch* m = s < matches.size() ? &matches[s] : nullptr;
    for (const auto& v : r.values) {
      os << r.h << "," << r.degree << "," << v.value.real() << "," << v.value.imag() << "," << v.residual << ",";
      const LatticePair* pair = nullptr;
      if (m)
        for (const auto& p : m->pairs)
          if (p.computed == v.value / r.h) pair = &p;
      if (pair)
        os << pair->lattice.real() << "," << pair->lattice.imag() << "," << pair->deviation << "\n";
      else
        os << ",,\n";
    }
  }
  return os.str();
}

std::string splitting_csv(const SplittingFit& fit) {
  std::ostringstream os;
  os.precision(17);
  os << "h,mu1,log_mu1_minus_log_h\n";
  for (const auto& p : fit.table) os << p.h << "," << p.mu1 << "," << std::log(p.mu1) - std::log(p.h) << "\n";
  return os.str();
}

json fit_json(const SplittingFit& fit, double slope_target, double slope_tolerance) {
  json j;
  j["slope"] = fit.slope;
  j["slope_target"] = slope_target;
  j["prefactor"] = fit.prefactor;
  j["r2"] = fit.r2;
  j["pass"] = fit.passed && std::abs(fit.slope - slope_target) <= slope_tolerance;
  return j;
}

}  // namespace kfp
