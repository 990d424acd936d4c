#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kfp/errors.hpp"
#include "kfp/spectral_lab.hpp"

#ifdef KFP_HAVE_EIGEN_ORACLE
#include <Eigen/Dense>
#endif

using namespace kfp;

namespace {

struct Dw {
  explicit Dw(const std::string& name)
      : model(registry_model(name)), wells(classify_landscape(find_critical_points(model))) {}
  ModelSpec model;
  WellStructure wells;
};

// Kramers-type rate coefficients by hand: a_j = |l_-| / pi sqrt(det H_j / |det H_0|), where
// l_- is the negative root of the 2x2 characteristic polynomial of A diag(V''(x0), 1).
double eyring_kramers(const Matrix& a, double v0, double vj) {
  const double m00 = a(0, 0) * v0, m01 = a(0, 1), m10 = a(1, 0) * v0, m11 = a(1, 1);
  const double tr = m00 + m11, det = m00 * m11 - m01 * m10;
  const double neg = tr / 2 - std::sqrt(tr * tr / 4 - det);
  return std::abs(neg) / M_PI * std::sqrt(vj / std::abs(v0));
}

double vpp(const ModelSpec& m, const CriticalPoint& cp) { return m.phi.hessian(cp.location)(0, 0); }

SpectrumOptions few(int k = 4) {
  SpectrumOptions o;
  o.count = k;
  o.cover_window = false;
  o.window = 1e300;
  return o;
}

std::vector<SplittingPoint> sweep(const ModelSpec& m, std::initializer_list<double> hs) {
  std::vector<SplittingPoint> t;
  for (double h : hs) t.push_back({h, splitting_value(complex_for_h(m, h))});
  return t;
}

}  // namespace

TEST_CASE("DW1 degree-0 window at h = 0.1 holds the predicted structure") {
  Dw d("DW1");
  const double h = 0.1;
  const DiscreteComplex c = complex_for_h(d.model, h);
  SpectrumOptions o;
  o.window = 2.0;
  const SpectrumResult s = low_spectrum(c, 0, o);
  CHECK(s.deflated);
  CHECK(s.window_covered);
  CHECK(s.accretive);
  CHECK(s.conjugate_closed);
  REQUIRE(s.values.size() >= 6);
  CHECK(s.values[0].deflated);
  CHECK(s.values[0].value == cplx(0.0));
  const cplx mu1 = s.values[1].value;
  CHECK(std::abs(mu1.imag()) <= 1e-12);
  CHECK(mu1.real() > 0);
  CHECK(mu1.real() < 1e-2 * h);
  auto near = [&](cplx target, double tol) {
    return std::any_of(s.values.begin(), s.values.end(),
                       [&](const SpectralValue& v) { return std::abs(v.value / h - target) <= tol; });
  };
  const double im = std::sqrt(7.0) / 2.0;
  CHECK(near(cplx((std::sqrt(5.0) - 1.0) / 2.0, 0.0), 0.05));
  CHECK(near(cplx(0.5, im), 0.25));
  CHECK(near(cplx(0.5, -im), 0.25));
  for (const auto& v : s.values) {
    CHECK(std::abs(v.value) < 2.0 * h);
    CHECK(v.residual <= 1e-8 * s.op_norm);
  }
  const CVec lat = lattice_multiset(d.model, 2.0);
  CHECK(window_violations(s, 2.0, default_imaginary_bound(lat)) == 0);
}

#ifdef KFP_HAVE_EIGEN_ORACLE
TEST_CASE("low spectrum agrees with a dense eigendecomposition on a small grid") {
  Dw d("DW1");
  const double h = 0.25;
  const DiscreteComplex c = assemble_complex(GridSpec{{2.0, 2.0}, {24, 24}}, d.model, h, false);
  const Matrix l = c.lap0.to_dense();
  Eigen::MatrixXd e(l.rows(), l.cols());
  for (std::size_t i = 0; i < l.rows(); ++i)
    for (std::size_t j = 0; j < l.cols(); ++j) e(i, j) = l(i, j);
  const Eigen::EigenSolver<Eigen::MatrixXd> oracle(e, false);
  std::vector<cplx> window;
  for (Eigen::Index i = 0; i < oracle.eigenvalues().size(); ++i)
    if (std::abs(oracle.eigenvalues()(i)) < 2.0 * h) window.push_back(oracle.eigenvalues()(i));
  SpectrumOptions o;
  o.window = 2.0;
  const SpectrumResult s = low_spectrum(c, 0, o);
  REQUIRE(s.values.size() == window.size());
  const double tol = 1e-8 * c.lap0.norm_inf();
  for (const auto& v : s.values) {
    const double best = std::abs(*std::min_element(window.begin(), window.end(), [&](cplx a, cplx b) {
                                   return std::abs(a - v.value) < std::abs(b - v.value);
                                 }) - v.value);
    CHECK(best <= tol);
  }
}
#endif

TEST_CASE("degree-1 pencil pairs with degree 0") {
  Dw d("DW1");
  const double h = 0.1;
  const DiscreteComplex c = complex_for_h(d.model, h, {}, true);
  SpectrumOptions o;
  o.window = 1.0;
  const SpectrumResult s0 = low_spectrum(c, 0, o);
  const SpectrumResult s1 = low_spectrum(c, 1, o);
  CHECK_FALSE(s1.deflated);
  REQUIRE(s0.values.size() >= 2);
  REQUIRE(!s1.values.empty());
  const double mu1 = s0.values[1].value.real();
  CHECK(std::abs(s1.values[0].value - mu1) <= 1e-8 * mu1);
  // every nonzero degree-0 value in the window reappears in degree 1
  for (const auto& v : s0.values) {
    if (v.deflated) continue;
    const bool found = std::any_of(s1.values.begin(), s1.values.end(), [&](const SpectralValue& w) {
      return std::abs(w.value - v.value) <= 1e-6 * std::abs(v.value);
    });
    CHECK(found);
  }
  CHECK_THROWS_AS(low_spectrum(complex_for_h(d.model, h), 1, o), std::invalid_argument);
}

TEST_CASE("single well: only the kernel below the first cluster") {
  const ModelSpec m = registry_model("single-well-test");
  const double h = 0.1;
  const DiscreteComplex c = complex_for_h(m, h);
  SpectrumOptions o;
  o.window = 2.0;
  const SpectrumResult s = low_spectrum(c, 0, o);
  for (const auto& v : s.values)
    if (!v.deflated) CHECK(std::abs(v.value) > 0.5 * h);
  CHECK(s.conjugate_closed);
  // the first nonzero value is a complex pair, so there is no real splitting
  CHECK_THROWS_AS(splitting_value(c), ComplexSplitting);
}

TEST_CASE("lattice matching") {
  const CVec lat{cplx(0), cplx(0), cplx(0.618, 0), cplx(0.5, 1.3), cplx(0.5, -1.3)};
  LatticeMatch exact = match_lattice(lat, lat);
  CHECK(exact.max_deviation == 0.0);
  CHECK(exact.pairs.size() == lat.size());
  CHECK(exact.unmatched_computed.empty());

  const LatticeMatch empty = match_lattice({}, lat);
  CHECK(empty.unmatched_lattice.size() == lat.size());
  CHECK(empty.pairs.empty());

  // multiplicity: two computed values near 0 use both lattice zeros; a third stays unmatched
  const CVec short_lat{cplx(0), cplx(0), cplx(0.618, 0)};
  const CVec comp{cplx(1e-6), cplx(2e-6), cplx(3e-6), cplx(0.62, 0)};
  const LatticeMatch m = match_lattice(comp, short_lat);
  REQUIRE(m.unmatched_computed.size() == 1);
  CHECK(m.unmatched_computed[0] == cplx(3e-6));
  CHECK(m.unmatched_lattice.empty());
  CHECK(m.max_deviation == doctest::Approx(0.002));
}

TEST_CASE("splitting value: size and two-point slope") {
  Dw d("DW1");
  const double mu_a = splitting_value(complex_for_h(d.model, 0.1));
  const double mu_b = splitting_value(complex_for_h(d.model, 0.07));
  CHECK(mu_a > 0);
  // h e^{-2S/h} = 0.1 e^{-5}; the prefactor is O(1)
  CHECK(mu_a > 0.01 * 0.1 * std::exp(-5.0));
  CHECK(mu_a < 10.0 * 0.1 * std::exp(-5.0));
  const double expect = -0.5 * (1 / 0.07 - 1 / 0.1);
  const double got = std::log(mu_b / 0.07) - std::log(mu_a / 0.1);
  CHECK(std::abs(got - expect) <= 0.1 * std::abs(expect));
  CHECK(std::abs(std::log(mu_b / mu_a) - (expect + std::log(0.7))) <= 0.1 * std::abs(expect));
}

TEST_CASE("fit recovers exact synthetic data and rejects bad input") {
  std::vector<SplittingPoint> t;
  for (double h : {0.06, 0.07, 0.08, 0.1, 0.12, 0.14}) t.push_back({h, h * 2.0 * std::exp(-0.5 / h)});
  const SplittingFit f = fit_splitting(t);
  CHECK(f.slope == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(f.prefactor == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.passed);

  CHECK_THROWS_AS(fit_splitting({t.begin(), t.begin() + 4}), BadFit);
  auto bad = t;
  bad[2].mu1 = -1.0;
  CHECK_THROWS_AS(fit_splitting(bad), BadFit);
  auto noisy = t;
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i].mu1 *= (i % 2 ? 3.0 : 1.0 / 3.0);
  CHECK_THROWS_AS(fit_splitting(noisy), BadFit);
  const SplittingFit lax = fit_splitting(noisy, false);
  CHECK_FALSE(lax.passed);
}

TEST_CASE("DW1 sweep: slope, jackknife and monotonicity") {
  Dw d("DW1");
  const auto table = sweep(d.model, {0.06, 0.07, 0.08, 0.10, 0.12, 0.14});
  for (std::size_t i = 1; i < table.size(); ++i) CHECK(table[i].mu1 > table[i - 1].mu1);
  const SplittingFit f = fit_splitting(table);
  CHECK(std::abs(f.slope - 0.5) <= 0.05 * 0.5);
  auto trimmed = table;
  trimmed.pop_back();  // largest h
  const SplittingFit g = fit_splitting(trimmed);
  CHECK(std::abs(g.slope - f.slope) <= 0.02 * f.slope);

  // prefactor pipeline against the fit
  const InteractionData p = predict_prefactor(d.model, d.wells);
  CHECK(p.total / f.prefactor <= 1.5);
  CHECK(f.prefactor / p.total <= 1.5);
}

TEST_CASE("prefactor pipeline reproduces the Kramers-type rate at small cutoff") {
  for (const char* name : {"DW1", "DW2", "DW1-selfadjoint"}) {
    CAPTURE(name);
    Dw d(name);
    const InteractionData p = predict_prefactor(d.model, d.wells, 0.02);
    REQUIRE(p.wells.size() == 2);
    CHECK(p.pairing == doctest::Approx(1.0).epsilon(1e-12));
    const double v0 = vpp(d.model, d.wells.saddle);
    for (const auto& w : p.wells) {
      const double oracle = eyring_kramers(d.model.a, v0, vpp(d.model, d.wells.well(w.well)));
      CHECK(w.a0 == doctest::Approx(oracle).epsilon(1e-3));
      CHECK(w.ell * w.ell_star > 0);
      CHECK(w.c0 > 0);
    }
    CHECK(p.sensitivity <= 0.2);
  }
  Dw d("DW1");
  const InteractionData p = predict_prefactor(d.model, d.wells);
  CHECK(std::abs(p.wells[0].a0 - p.wells[1].a0) <= 1e-8 * p.wells[0].a0);
  CHECK(p.sensitivity <= 0.2);
  CHECK(p.total_half_radius > 0);
  const json j = p.to_json();
  CHECK(j["wells"].size() == 2);
  CHECK(j.contains("sensitivity"));
  // the incoming curve is only trusted within half the saddle-to-well distance
  CHECK_THROWS_AS(predict_prefactor(d.model, d.wells, 0.8), CurveEscapesQuadraticRegion);
  CHECK_THROWS_AS(predict_prefactor(d.model, d.wells, 0.0), std::invalid_argument);
}

TEST_CASE("selfadjoint case: pipeline against the fit on the symmetric operator") {
  Dw d("DW1-selfadjoint");
  const SplittingFit f = fit_splitting(sweep(d.model, {0.08, 0.09, 0.10, 0.12, 0.14}));
  CHECK(std::abs(f.slope - 0.5) <= 0.025);
  const InteractionData p = predict_prefactor(d.model, d.wells);
  CHECK(p.total / f.prefactor <= 1.5);
  CHECK(f.prefactor / p.total <= 1.5);
}

TEST_CASE("resolvent probes") {
  Dw d("DW1");
  const CVec z = default_probes(0.1);
  REQUIRE(z.size() == 8);
  CHECK(std::arg(z[0]) == doctest::Approx(M_PI / 8));
  for (const cplx& p : z) CHECK(std::abs(p) == doctest::Approx(0.2));

  const double h = 0.25;
  const DiscreteComplex c = assemble_complex(GridSpec{{2.0, 2.0}, {24, 24}}, d.model, h, false);
  SpectrumOptions o;
  o.window = 3.0;
  const SpectrumResult s = low_spectrum(c, 0, o);
  CVec spec;
  for (const auto& v : s.values) spec.push_back(v.value);
  const auto r = resolvent_probe(c, default_probes(h), spec);
  REQUIRE(r.size() == 8);
  for (const auto& p : r) {
    CHECK(p.sigma_min > 0);
    CHECK(p.scaled == doctest::Approx(h / p.sigma_min));
  }
  // accretivity bound for Re z < 0
  const CVec left{std::polar(h, 0.75 * M_PI), cplx(-h, 0.0)};
  for (const auto& p : resolvent_probe(c, left, spec)) CHECK(p.norm <= (1.0 + 1e-6) / std::abs(p.z.real()));
  // a probe on the spectrum is rejected
  const CVec on{s.values[2].value};
  CHECK_THROWS_AS(resolvent_probe(c, on, spec), std::invalid_argument);

#ifdef KFP_HAVE_EIGEN_ORACLE
  const Matrix l = c.lap0.to_dense();
  for (std::size_t k = 0; k < 2; ++k) {
    Eigen::MatrixXcd e(l.rows(), l.cols());
    for (std::size_t i = 0; i < l.rows(); ++i)
      for (std::size_t j = 0; j < l.cols(); ++j) e(i, j) = l(i, j) - (i == j ? r[k].z : cplx(0.0));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> gram(e.adjoint() * e, Eigen::EigenvaluesOnly);
    const double smin = std::sqrt(gram.eigenvalues()(0));
    CHECK(r[k].sigma_min == doctest::Approx(smin).epsilon(1e-4));
  }
#endif
}

TEST_CASE("localization of the tunnelling eigenvectors") {
  Dw d("DW1");
  const double h = 0.05;
  const DiscreteComplex c = complex_for_h(d.model, h, {}, true);
  SpectrumOptions o = few(3);
  o.want_vectors = true;
  const SpectrumResult s0 = low_spectrum(c, 0, o);
  const SpectrumResult s1 = low_spectrum(c, 1, o);
  const LocalizationReport r = localization_check(c, d.wells, s0.values[1].vector, s1.values[0].vector);
  CHECK(r.degree0_passed);
  CHECK(r.overlap_minus >= 0.9);
  CHECK(r.overlap_plus >= 0.9);
  // leading-order oracle: |e0|^2 ~ exp(-2 phi_+ / h), Gaussian mass in the ball of radius 0.5
  const InteractionData p = predict_prefactor(d.model, d.wells);
  auto gaussian_fraction = [&](double hh) {
    double in = 0, all = 0;
    const int n = 600;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double x = -3 + 6 * (i + 0.5) / n, y = -3 + 6 * (j + 0.5) / n;
        const double q = p.phi_plus(0, 0) * x * x + 2 * p.phi_plus(0, 1) * x * y + p.phi_plus(1, 1) * y * y;
        const double w = std::exp(-q / hh);
        all += w;
        if (x * x + y * y < 0.25) in += w;
      }
    return in / all;
  };
  CHECK(r.saddle_fraction == doctest::Approx(gaussian_fraction(h)).epsilon(0.05));

  // the Maxwellian itself overlaps both truncated quasimodes positively
  CVec m(c.maxwellian.begin(), c.maxwellian.end());
  const LocalizationReport k = localization_check(c, d.wells, m, {});
  CHECK(k.overlap_minus > 0.9);
  CHECK(k.overlap_plus > 0.9);

  // negative control: a well-localized degree-1 vector is not near the saddle
  const LocalizationReport swapped = localization_check(c, d.wells, {}, s1.values[2].vector);
  CHECK_FALSE(swapped.degree1_passed);

  // at smaller h the degree-1 form concentrates inside the ball
  const double hs = 0.03;
  const DiscreteComplex cs = complex_for_h(d.model, hs, {}, true);
  SpectrumOptions os = few(1);
  os.want_vectors = true;
  const SpectrumResult t1 = low_spectrum(cs, 1, os);
  const LocalizationReport rs = localization_check(cs, d.wells, {}, t1.values[0].vector);
  CHECK(rs.degree1_passed);
  CHECK(rs.saddle_fraction == doctest::Approx(gaussian_fraction(hs)).epsilon(0.05));
}

TEST_CASE("plot-ready outputs") {
  Dw d("DW1");
  const DiscreteComplex c = complex_for_h(d.model, 0.14);
  SpectrumOptions o;
  o.window = 1.0;
  const SpectrumResult s = low_spectrum(c, 0, o);
  const LatticeMatch m = match_lattice(s.scaled(), lattice_multiset(d.model, 1.5));
  const std::string csv = spectrum_csv({s}, {m});
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "h,degree,re,im,residual,matched_mu_re,matched_mu_im,deviation");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 7);
  }
  CHECK(rows == static_cast<int>(s.values.size()));

  std::vector<SplittingPoint> t;
  for (double h : {0.06, 0.07, 0.08, 0.1, 0.12}) t.push_back({h, h * std::exp(-0.5 / h)});
  const SplittingFit f = fit_splitting(t);
  const std::string sc = splitting_csv(f);
  CHECK(sc.rfind("h,mu1,log_mu1_minus_log_h\n", 0) == 0);
  CHECK(std::count(sc.begin(), sc.end(), '\n') == 6);
  const json j = fit_json(f, 0.5, 0.025);
  CHECK(j["pass"].get<bool>());
  CHECK(j["slope_target"].get<double>() == 0.5);
  for (const char* key : {"slope", "slope_target", "prefactor", "r2", "pass"}) CHECK(j.contains(key));
  CHECK_FALSE(fit_json(f, 0.3, 0.025)["pass"].get<bool>());
}
