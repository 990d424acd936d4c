#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kfp/errors.hpp"
#include "kfp/json_io.hpp"
#include "kfp/landscape.hpp"

using namespace kfp;

namespace {

// Real roots of t^3 + p t + q (three-root case) by the trigonometric formula.
std::vector<double> cubic_roots(double p, double q) {
  const double r = 2.0 * std::sqrt(-p / 3.0);
  const double theta = std::acos(3.0 * q / (2.0 * p) * std::sqrt(-3.0 / p)) / 3.0;
  std::vector<double> roots;
  for (int k = 0; k < 3; ++k) roots.push_back(r * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0));
  std::sort(roots.begin(), roots.end());
  return roots;
}

double dw2_v(double x) { return x * x * x * x / 4.0 - x * x / 2.0 + x / 10.0; }

}  // namespace

TEST_CASE("eval_phi on DW1") {
  const ModelSpec m = registry_model("DW1");
  SUBCASE("minimum (1, 0)") {
    const Vec x{1.0, 0.0};
    PhiEval e = eval_phi(m, x);
    CHECK(e.value == -0.25);
    CHECK(e.gradient[0] == 0.0);
    CHECK(e.gradient[1] == 0.0);
    CHECK(e.hessian(0, 0) == 2.0);
    CHECK(e.hessian(1, 1) == 1.0);
    CHECK(e.hessian(0, 1) == 0.0);
  }
  SUBCASE("saddle (0, 0)") {
    const Vec x{0.0, 0.0};
    PhiEval e = eval_phi(m, x);
    CHECK(e.hessian(0, 0) == -1.0);
    CHECK(e.hessian(1, 1) == 1.0);
  }
  SUBCASE("constant term is the value at the origin") {
    ModelSpec c = m;
    std::vector<Monomial> terms = c.phi.terms();
    terms.push_back({{0, 0}, 3.5});
    c.phi = Polynomial(2, terms);
    const Vec x{0.0, 0.0};
    CHECK(eval_phi(c, x).value == 3.5);
  }
}

TEST_CASE("polynomial derivatives match finite differences on a mixed polynomial") {
  Polynomial p(3, {{{2, 1, 0}, 1.5}, {{0, 3, 1}, -0.7}, {{1, 1, 1}, 2.0}, {{4, 0, 2}, 0.1}});
  const Vec x{0.3, -1.2, 0.8};
  const Vec g = p.gradient(x);
  const Matrix h = p.hessian(x);
  const double eps = 1e-5;
  for (int k = 0; k < 3; ++k) {
    Vec xp = x, xm = x;
    xp[k] += eps;
    xm[k] -= eps;
    CHECK(std::abs((p.value(xp) - p.value(xm)) / (2 * eps) - g[k]) < 1e-8);
    const Vec gp = p.gradient(xp), gm = p.gradient(xm);
    for (int j = 0; j < 3; ++j) CHECK(std::abs((gp[j] - gm[j]) / (2 * eps) - h(j, k)) < 1e-8);
  }
}

TEST_CASE("critical points of DW1") {
  const ModelSpec m = registry_model("DW1");
  auto pts = find_critical_points(m);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].value == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(pts[1].value == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(std::abs(pts[0].location[0] + 1.0) < 1e-12);
  CHECK(std::abs(pts[1].location[0] - 1.0) < 1e-12);
  CHECK(std::abs(pts[2].location[0]) < 1e-12);
  CHECK(pts[2].index == 1);
  for (const auto& p : pts) {
    CHECK(norm2(m.phi.gradient(p.location)) <= 1e-10 * (1 + norm2(p.location)));
  }
}

TEST_CASE("single well has exactly one minimum") {
  auto pts = find_critical_points(registry_model("single-well-test"));
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].index == 0);
  CHECK(norm2(pts[0].location) < 1e-14);
}

TEST_CASE("critical points of DW2 match the cubic roots") {
  const ModelSpec m = registry_model("DW2");
  auto pts = find_critical_points(m);
  REQUIRE(pts.size() == 3);
  const auto roots = cubic_roots(-1.0, 0.1);
  CHECK(roots[0] == doctest::Approx(-1.046).epsilon(1e-3));
  std::vector<double> xs;
  for (const auto& p : pts) xs.push_back(p.location[0]);
  std::sort(xs.begin(), xs.end());
  for (int k = 0; k < 3; ++k) CHECK(std::abs(xs[k] - roots[k]) < 1e-12);
  // distinct values
  CHECK(pts[0].value < pts[1].value);
  CHECK(pts[1].value < pts[2].value);
}

TEST_CASE("classify_landscape") {
  SUBCASE("DW1 symmetric actions") {
    WellStructure w = classify_landscape(find_critical_points(registry_model("DW1")));
    CHECK(w.s_minus == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(w.s_plus == w.s_minus);
    CHECK(w.s_min == doctest::Approx(0.25).epsilon(1e-14));
    // mirror images
    CHECK(w.minus.location[0] == -w.plus.location[0]);
    CHECK(w.minus.location[1] == -w.plus.location[1]);
  }
  SUBCASE("DW2 actions from the cubic-root oracle") {
    WellStructure w = classify_landscape(find_critical_points(registry_model("DW2")));
    const auto r = cubic_roots(-1.0, 0.1);
    const double s_minus = dw2_v(r[1]) - dw2_v(r[0]);
    const double s_plus = dw2_v(r[1]) - dw2_v(r[2]);
    CHECK(std::abs(w.s_minus - s_minus) < 1e-12);
    CHECK(std::abs(w.s_plus - s_plus) < 1e-12);
    CHECK(w.s_min == doctest::Approx(std::min(s_minus, s_plus)));
    CHECK(w.shallow == 1);
    CHECK(w.s_plus < w.s_minus);
  }
  SUBCASE("single well is rejected") {
    CHECK_THROWS_AS(classify_landscape(find_critical_points(registry_model("single-well-test"))),
                    NotDoubleWell);
  }
}

TEST_CASE("degenerate critical points are fatal") {
  // phi = x^4/4 + y^2/2 has a degenerate minimum at the origin
  ModelSpec m = registry_model("DW1");
  m.phi = Polynomial(2, {{{4, 0}, 0.25}, {{0, 2}, 0.5}});
  CHECK_THROWS_AS(find_critical_points(m), DegenerateCritical);
}

TEST_CASE("model validation") {
  ModelSpec m = registry_model("DW1");
  CHECK_NOTHROW(m.validate());
  SUBCASE("singular A") {
    ModelSpec s = registry_model("nu-zero-test");
    CHECK_THROWS_AS(s.validate(), InvalidModel);
    CHECK_NOTHROW(s.validate(false));
  }
  SUBCASE("indefinite symmetric part") {
    m.a = Matrix{{-1.0, 0.0}, {0.0, 1.0}};
    CHECK_THROWS_AS(m.validate(), InvalidModel);
  }
  SUBCASE("B and C kernels are complementary for the kinetic matrix") {
    const Matrix b = m.b(), c = m.c();
    CHECK(b(0, 0) == 0.0);
    CHECK(b(1, 1) == 0.5);
    CHECK(c(0, 1) == 0.5);
    CHECK(c(1, 0) == -0.5);
  }
}

TEST_CASE("model JSON round trip is exact") {
  for (const auto& name : registry_names()) {
    const ModelSpec m = registry_model(name);
    const std::string text = model_to_json(m).dump();
    const ModelSpec back = model_from_json(parse_json_text(text), false);
    CHECK(back.name == m.name);
    CHECK(back.dim == m.dim);
    REQUIRE(back.phi.terms().size() == m.phi.terms().size());
    for (std::size_t k = 0; k < m.phi.terms().size(); ++k) {
      CHECK(back.phi.terms()[k].coef == m.phi.terms()[k].coef);
      CHECK(back.phi.terms()[k].exps == m.phi.terms()[k].exps);
    }
    CHECK(max_abs(back.a - m.a) == 0.0);
  }
  SUBCASE("awkward binary64 coefficients survive") {
    ModelSpec m = registry_model("DW2");
    std::vector<Monomial> t = m.phi.terms();
    t.push_back({{1, 1}, 0.1 + 0.2});
    t.push_back({{3, 1}, 1.0 / 3.0});
    m.phi = Polynomial(2, t);
    const ModelSpec back = model_from_json(parse_json_text(model_to_json(m).dump()));
    CHECK(back.phi.terms()[t.size() - 2].coef == 0.1 + 0.2);
    CHECK(back.phi.terms()[t.size() - 1].coef == 1.0 / 3.0);
  }
}

TEST_CASE("malformed model JSON reports line and column") {
  const std::string bad = "{\n  \"name\": \"x\",\n  \"dim\": 2,\n  \"phi\": [ oops ]\n}";
  try {
    parse_json_text(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 4);
    CHECK(e.column() > 1);
  }
  CHECK_THROWS_AS(model_from_json(parse_json_text("{\"name\":\"x\",\"dim\":2}")), ConfigError);
  CHECK_THROWS_AS(
      model_from_json(parse_json_text(
          "{\"name\":\"x\",\"dim\":1,\"phi\":[],\"A\":[[1]],\"extra\":1}")),
      ConfigError);
}
