#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "kfp/dense_linalg.hpp"
#include "kfp/discrete_complex.hpp"
#include "kfp/errors.hpp"

#ifdef KFP_HAVE_EIGEN_ORACLE
#include <Eigen/Dense>
#endif

using namespace kfp;

namespace {

GridSpec square_grid(double l, int n, std::size_t dim = 2) {
  return GridSpec{std::vector<double>(dim, l), std::vector<int>(dim, n)};
}

ModelSpec quadratic_model(int dim, const Matrix& a) {
  std::vector<Monomial> terms;
  for (int k = 0; k < dim; ++k) {
    std::vector<int> e(dim, 0);
    e[k] = 2;
    terms.push_back({e, 0.5});
  }
  ModelSpec m;
  m.name = "quadratic";
  m.dim = dim;
  m.phi = Polynomial(dim, terms);
  m.a = a;
  return m;
}

ModelSpec flat_model(int dim) {
  ModelSpec m;
  m.name = "flat";
  m.dim = dim;
  m.phi = Polynomial(dim, {});
  m.a = Matrix::identity(dim);
  return m;
}

// random A with A + A^T >= 0: B = G G^T, C antisymmetric
Matrix random_accretive(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix f(n, n), c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f(i, j) = g(rng);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      c(i, j) = g(rng);
      c(j, i) = -c(i, j);
    }
  return f * f.transpose() * 0.5 + c;
}

}  // namespace

TEST_CASE("grid construction and validation") {
  const Vec l{2.5, 2.5};
  const GridSpec g = GridSpec::for_h(l, 0.1);
  CHECK(g.intervals[0] == 100);
  CHECK(g.spacing(0) <= 0.05 + 1e-15);
  CHECK_THROWS_AS(square_grid(1.0, 15).validate(), InvalidGrid);
  CHECK_THROWS_AS((GridSpec{{1.0}, {16, 16}}).validate(), InvalidGrid);
  CHECK_THROWS_AS(square_grid(-1.0, 20).validate(), InvalidGrid);
  CHECK_NOTHROW(square_grid(1.0, 16).validate());

  // tail estimate: the DW1 box of half width 2.5 is far beyond 1e-12 at h = 0.14
  const ModelSpec dw1 = registry_model("DW1");
  CHECK(maxwellian_tail_estimate(dw1, GridSpec::for_h(l, 0.14), 0.14) <= 1e-12);
  const Vec small{1.0, 1.0};
  CHECK(maxwellian_tail_estimate(dw1, GridSpec::for_h(small, 0.14), 0.14) > 1e-12);
}

TEST_CASE("form layouts index every staggered location exactly once") {
  const GridSpec g{{1.0, 2.0}, {16, 20}};
  for (int q = 0; q <= 2; ++q) {
    const FormLayout f(g, q);
    std::size_t expect = 0;
    for (const auto& comp : f.components()) {
      std::size_t m = 1;
      for (std::size_t d = 0; d < 2; ++d) {
        const bool stag = std::find(comp.begin(), comp.end(), static_cast<int>(d)) != comp.end();
        m *= static_cast<std::size_t>(g.intervals[d] + (stag ? 0 : 1));
      }
      expect += m;
    }
    CHECK(f.size() == expect);
    for (std::size_t idx = 0; idx < f.size(); ++idx) {
      const auto [c, i] = f.locate(idx);
      REQUIRE(f.index(c, i) == idx);
      const Vec p = f.position(idx);
      for (std::size_t d = 0; d < 2; ++d) {
        const bool stag = std::find(f.components()[c].begin(), f.components()[c].end(),
                                    static_cast<int>(d)) != f.components()[c].end();
        CHECK(p[d] == doctest::Approx(-g.half_width[d] + (i[d] + (stag ? 0.5 : 0.0)) * g.spacing(d)));
      }
    }
  }
  // out-of-box neighbours are absent
  const FormLayout e(g, 1);
  const std::vector<int> last{16, 3};
  CHECK(e.index(0, last) == FormLayout::npos);
}

TEST_CASE("flat weight gives the plain scaled difference and the Maxwellian is annihilated") {
  const GridSpec g = square_grid(1.0, 16);
  const double h = 0.3;
  const CsrMatrix d = build_difference(g, flat_model(2), h, 0);
  const FormLayout nodes(g, 0), edges(g, 1);
  for (std::size_t t = 0; t < edges.size(); ++t) {
    const auto [c, i] = edges.locate(t);
    if (c != 0) {
      CHECK(d.row_ptr()[t + 1] == d.row_ptr()[t]);
      continue;
    }
    std::vector<int> j = i;
    const std::size_t a = nodes.index(0, j);
    ++j[0];
    const std::size_t b = nodes.index(0, j);
    CHECK(d.get(t, b) == doctest::Approx(h / g.spacing(0)).epsilon(1e-15));
    CHECK(d.get(t, a) == doctest::Approx(-h / g.spacing(0)).epsilon(1e-15));
  }

  const ModelSpec dw1 = registry_model("DW1");
  for (std::size_t k = 0; k < 2; ++k) {
    const CsrMatrix dk = build_difference(g, dw1, 0.2, k);
    Vec m(nodes.size());
    for (std::size_t p = 0; p < m.size(); ++p) m[p] = std::exp(-dw1.phi.value(nodes.position(p)) / 0.2);
    const Vec r = dk.apply(m);
    CHECK(norm_inf(r) <= 1e-15 * dk.norm_inf() * norm_inf(m));
  }
}

TEST_CASE("one-dimensional difference is second-order consistent with h u' + phi' u") {
  // phi = x^2/2, u = cos x: target h u' + x u = -h sin x + x cos x
  const ModelSpec m = quadratic_model(1, Matrix::identity(1));
  const double h = 0.1;
  auto error_at = [&](int n) {
    const GridSpec g{{0.4}, {n}};
    const CsrMatrix d = build_difference(g, m, h, 0);
    const FormLayout nodes(g, 0), edges(g, 1);
    Vec u(nodes.size());
    for (std::size_t p = 0; p < u.size(); ++p) u[p] = std::cos(nodes.position(p)[0]);
    const Vec du = d.apply(u);
    double worst = 0.0;
    for (std::size_t t = 0; t < edges.size(); ++t) {
      const double x = edges.position(t)[0];
      worst = std::max(worst, std::abs(du[t] - (-h * std::sin(x) + x * std::cos(x))));
    }
    return worst;
  };
  // Delta = 0.05 at n = 16; edge (0, 0.05) has its midpoint at 0.025
  const double e16 = error_at(16), e32 = error_at(32);
  CHECK(e16 <= 0.05 * 0.05);
  CHECK(e16 / e32 == doctest::Approx(4.0).epsilon(0.1));

  const GridSpec g{{0.4}, {16}};
  const FormLayout edges(g, 1);
  std::size_t mid = FormLayout::npos;
  for (std::size_t t = 0; t < edges.size(); ++t)
    if (std::abs(edges.position(t)[0] - 0.025) < 1e-12) mid = t;
  REQUIRE(mid != FormLayout::npos);
  const FormLayout nodes(g, 0);
  Vec u(nodes.size());
  for (std::size_t p = 0; p < u.size(); ++p) u[p] = std::cos(nodes.position(p)[0]);
  const double got = build_difference(g, m, h, 0).apply(u)[mid];
  CHECK(std::abs(got - (-h * std::sin(0.025) + 0.025 * std::cos(0.025))) <= 0.05 * 0.05);
}

TEST_CASE("complex identities hold at roundoff for DW1") {
  const ModelSpec dw1 = registry_model("DW1");
  const Vec l{2.5, 2.5};
  const double h = 0.1;
  const DiscreteComplex c = assemble_complex(GridSpec::for_h(l, h), dw1, h);
  const ComplexDefects d = complex_defects(c);
  CHECK(d.d1d0 <= 1e-13);
  CHECK(d.kernel <= 1e-12);
  CHECK(d.intertwining <= 1e-12);
  CHECK(norm2(c.maxwellian) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.d1.rows() == c.faces.size());
  CHECK(c.lap1_k.rows() == c.edges.size());

  // one-dimensional complex: d1 is empty, identities still hold
  std::vector<Monomial> t{{{4}, 0.25}, {{2}, -0.5}};
  ModelSpec one{"dw-1d", 1, Polynomial(1, t), Matrix{{0.5}}};
  const DiscreteComplex c1 = assemble_complex(GridSpec{{2.0}, {80}}, one, 0.1);
  CHECK(c1.d1.rows() == 0);
  const ComplexDefects d1 = complex_defects(c1);
  CHECK(d1.kernel <= 1e-12);
  CHECK(d1.intertwining <= 1e-12);
}

TEST_CASE("lap0 reproduces the Kramers-Fokker-Planck operator to second order") {
  // u = x e^{-(x^2+y^2)}; V' = x^3 - x; gamma = 1
  const ModelSpec dw1 = registry_model("DW1");
  const double h = 0.1;
  auto reference = [&](double x, double y) {
    const double e = std::exp(-(x * x + y * y));
    const double u = x * e, ux = (1 - 2 * x * x) * e, uy = -2 * x * y * e;
    const double uyy = x * (4 * y * y - 2) * e;
    const double vp = x * x * x - x;
    return y * h * ux - vp * h * uy + 0.5 * (-h * h * uyy + y * y * u - h * u);
  };
  auto error_at = [&](int n, double stab) {
    const GridSpec g = square_grid(2.5, n);
    const DiscreteComplex c = assemble_complex(g, dw1, h, false, stab);
    Vec u(c.nodes.size());
    for (std::size_t p = 0; p < u.size(); ++p) {
      const Vec x = c.nodes.position(p);
      u[p] = x[0] * std::exp(-(x[0] * x[0] + x[1] * x[1]));
    }
    const Vec lu = c.lap0.apply(u);
    double worst = 0.0;
    for (std::size_t p = 0; p < u.size(); ++p) {
      const Vec x = c.nodes.position(p);
      if (std::abs(x[0]) > 1.5 || std::abs(x[1]) > 1.5) continue;
      worst = std::max(worst, std::abs(lu[p] - reference(x[0], x[1])));
    }
    return worst;
  };
  for (double stab : {0.0, 1.0}) {
    CAPTURE(stab);
    const double e100 = error_at(100, stab), e200 = error_at(200, stab);
    // Delta = 0.05; the stabilization adds (Delta^2/h) (phi'^2 - h phi'' - h^2 d^2)
    CHECK(e100 <= 6.0 * 0.05 * 0.05);
    CHECK(e100 / e200 >= 3.5);
    CHECK(e100 / e200 <= 4.5);
  }
}

TEST_CASE("selfadjoint case: A = I with a quadratic weight gives a symmetric PSD lap0") {
  const ModelSpec m = quadratic_model(2, Matrix::identity(2));
  const DiscreteComplex c = assemble_complex(square_grid(2.0, 20), m, 0.3, false, 0.0);
  const CsrMatrix asym = add(1.0, c.lap0, -1.0, c.lap0.transpose());
  CHECK(asym.max_abs() <= 1e-12 * c.lap0.max_abs());
  const SymmetricEigen se = symmetric_eigen(c.lap0.to_dense(), false);
  CHECK(se.values.front() >= -1e-12 * c.lap0.norm_inf());
  CHECK(std::abs(se.values.front()) <= 1e-12 * c.lap0.norm_inf());
}

TEST_CASE("adjoint symmetry between A and its transpose") {
  const ModelSpec dw1 = registry_model("DW1");
  ModelSpec dw1t = dw1;
  dw1t.a = dw1.a.transpose();
  const GridSpec g = square_grid(2.5, 40);
  const DiscreteComplex ca = assemble_complex(g, dw1, 0.2, false);
  const DiscreteComplex ct = assemble_complex(g, dw1t, 0.2, false);
  CHECK(adjoint_symmetry_check(ca, ct) <= 1e-12 * ca.lap0.max_abs());
  // the check is not vacuous: lap0 itself is far from symmetric
  CHECK(adjoint_symmetry_check(ca, ca) > 1e-3 * ca.lap0.max_abs());

  // symmetric A: the check measures the asymmetry of lap0
  const ModelSpec sym = registry_model("DW1-selfadjoint");
  const DiscreteComplex cs = assemble_complex(g, sym, 0.2, false);
  CHECK(adjoint_symmetry_check(cs, cs) <= 1e-12 * cs.lap0.max_abs());

  // random accretive A on a tiny grid, three dimensions included
  std::mt19937_64 rng(42);
  for (int n : {2, 3}) {
    for (int trial = 0; trial < 3; ++trial) {
      ModelSpec m = quadratic_model(n, random_accretive(rng, n));
      ModelSpec mt = m;
      mt.a = m.a.transpose();
      const GridSpec tiny = square_grid(1.5, 16, static_cast<std::size_t>(n));
      const DiscreteComplex a = assemble_complex(tiny, m, 0.5, false, 0.0);
      const DiscreteComplex b = assemble_complex(tiny, mt, 0.5, false, 0.0);
      CHECK(adjoint_symmetry_check(a, b) <= 1e-12 * a.lap0.max_abs());
    }
  }
}

TEST_CASE("accretivity of lap0 on a 32x32 grid") {
  const ModelSpec dw1 = registry_model("DW1");
  for (double stab : {0.0, 1.0}) {
    const DiscreteComplex c = assemble_complex(square_grid(2.5, 31), dw1, 0.2, false, stab);
    REQUIRE(c.nodes.size() == 32 * 32);
    const Matrix l = c.lap0.to_dense();
    const Matrix s = symmetric_part(l);
    const double scale = c.lap0.norm_inf();
    const SymmetricEigen se = symmetric_eigen(s, false);
    CHECK(se.values.front() >= -1e-10 * scale);
#ifdef KFP_HAVE_EIGEN_ORACLE
    Eigen::MatrixXd es(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i)
      for (std::size_t j = 0; j < s.cols(); ++j) es(i, j) = s(i, j);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oracle(es, Eigen::EigenvaluesOnly);
    CHECK(oracle.eigenvalues()(0) >= -1e-10 * scale);
    CHECK(se.values.front() == doctest::Approx(oracle.eigenvalues()(0)).epsilon(1e-8).scale(scale));
#endif
    std::mt19937_64 rng(42);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
      Vec v(c.nodes.size());
      for (auto& x : v) x = gauss(rng);
      const Vec lv = c.lap0.apply(v);
      CHECK(dot(v, lv) >= -1e-10 * scale * dot(v, v));
    }
  }
  // random accretive A and a double-well weight in three dimensions
  std::mt19937_64 rng(7);
  ModelSpec m = quadratic_model(3, random_accretive(rng, 3));
  const DiscreteComplex c3 = assemble_complex(square_grid(1.5, 16, 3), m, 0.4, false, 0.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    Vec v(c3.nodes.size());
    for (auto& x : v) x = gauss(rng);
    CHECK(dot(v, c3.lap0.apply(v)) >= -1e-10 * c3.lap0.norm_inf() * dot(v, v));
  }
}

TEST_CASE("stabilized spectrum is free of grid-scale real modes") {
  // below the saddle value 0.618 h only 0 and the tunnelling value may be real
  const ModelSpec dw1 = registry_model("DW1");
  const double h = 0.2;
  const Vec l{2.0, 2.0};
  auto spurious = [&](double stab) {
    const DiscreteComplex c = assemble_complex(GridSpec::for_h(l, h), dw1, h, false, stab);
    const CVec ev = dense_eigenvalues(c.lap0.to_dense());
    int count = 0;
    for (const cplx& z : ev) {
      CHECK(z.real() >= -1e-8 * c.lap0.norm_inf());
      if (std::abs(z.imag()) < 1e-8 && z.real() > 0.05 * h && z.real() < 0.5 * h) ++count;
    }
    return count;
  };
  CHECK(spurious(1.0) == 0);
  CHECK(spurious(0.0) > 0);
}

TEST_CASE("structural errors") {
  // four dimensions
  ModelSpec m4 = quadratic_model(4, Matrix::identity(4));
  CHECK_THROWS_AS(assemble_complex(square_grid(1.0, 16, 4), m4, 0.5), DimensionUnsupported);
  // h far below the grid scale
  const ModelSpec dw1 = registry_model("DW1");
  CHECK_THROWS_AS(assemble_complex(square_grid(2.5, 16), dw1, 1e-3), GaugeOverflow);
  CHECK_THROWS_AS(build_difference(square_grid(2.5, 16), dw1, 1e-3, 0), GaugeOverflow);
  CHECK_THROWS_AS(assemble_complex(square_grid(2.5, 12), dw1, 0.1), InvalidGrid);
  CHECK_THROWS_AS(assemble_complex(square_grid(2.5, 20, 3), dw1, 0.1), InvalidGrid);
}

TEST_CASE("triplet export round-trips the assembled matrices") {
  const ModelSpec dw1 = registry_model("DW1");
  const DiscreteComplex c = assemble_complex(square_grid(2.5, 16), dw1, 0.3);
  for (const CsrMatrix* m : {&c.d0, &c.d1, &c.lap0, &c.lap1_k}) {
    std::stringstream ss;
    m->write_triplets(ss);
    std::string header;
    std::getline(ss, header);
    std::ostringstream expect;
    expect << m->rows() << ' ' << m->cols() << ' ' << m->nnz();
    CHECK(header == expect.str());
    ss.seekg(0);
    const CsrMatrix back = CsrMatrix::read_triplets(ss);
    REQUIRE(back.nnz() == m->nnz());
    CHECK(add(1.0, back, -1.0, *m).max_abs() == 0.0);
  }
}
