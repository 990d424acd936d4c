#include "kfp/model.hpp"

#include <algorithm>
#include <cmath>

#include "kfp/dense_linalg.hpp"
#include "kfp/errors.hpp"

namespace kfp {

namespace {

// x^e and its first two derivatives, exact for small integer exponents.
struct PowerTable {
  double p0, p1, p2;
};

PowerTable powers(double x, int e) {
  if (e == 0) return {1.0, 0.0, 0.0};
  double xe2 = 1.0;  // x^(e-2) when e >= 2
  for (int k = 0; k < e - 2; ++k) xe2 *= x;
  if (e == 1) return {x, 1.0, 0.0};
  const double xe1 = xe2 * x;
  return {xe1 * x, e * xe1, e * (e - 1) * xe2};
}

}  // namespace

Polynomial::Polynomial(int dim, std::vector<Monomial> terms) : dim_(dim), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (static_cast<int>(t.exps.size()) != dim_)
      throw InvalidModel("polynomial term has " + std::to_string(t.exps.size()) +
                         " exponents, expected " + std::to_string(dim_));
    for (int e : t.exps)
      if (e < 0) throw InvalidModel("polynomial exponent must be nonnegative");
  }
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& t : terms_) {
    int s = 0;
    for (int e : t.exps) s += e;
    d = std::max(d, s);
  }
  return d;
}

double Polynomial::value(std::span<const double> x) const {
  double v = 0.0;
  for (const auto& t : terms_) {
    double m = t.coef;
    for (int k = 0; k < dim_; ++k) m *= powers(x[k], t.exps[k]).p0;
    v += m;
  }
  return v;
}

Vec Polynomial::gradient(std::span<const double> x) const {
  Vec g(dim_, 0.0);
  std::vector<PowerTable> pw(dim_);
  for (const auto& t : terms_) {
    for (int k = 0; k < dim_; ++k) pw[k] = powers(x[k], t.exps[k]);
    for (int j = 0; j < dim_; ++j) {
      if (t.exps[j] == 0) continue;
      double m = t.coef;
      for (int k = 0; k < dim_; ++k) m *= (k == j ? pw[k].p1 : pw[k].p0);
      g[j] += m;
    }
  }
  return g;
}

Matrix Polynomial::hessian(std::span<const double> x) const {
  Matrix h(dim_, dim_);
  std::vector<PowerTable> pw(dim_);
  for (const auto& t : terms_) {
    for (int k = 0; k < dim_; ++k) pw[k] = powers(x[k], t.exps[k]);
    for (int i = 0; i < dim_; ++i) {
      for (int j = i; j < dim_; ++j) {
        double m = t.coef;
        for (int k = 0; k < dim_; ++k) {
          if (i == j && k == i) {
            m *= pw[k].p2;
          } else if (k == i || k == j) {
            m *= pw[k].p1;
          } else {
            m *= pw[k].p0;
          }
        }
        h(i, j) += m;
      }
    }
  }
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < i; ++j) h(i, j) = h(j, i);
  return h;
}

Matrix ModelSpec::b() const { return 0.5 * (a + a.transpose()); }
Matrix ModelSpec::c() const { return 0.5 * (a - a.transpose()); }

bool ModelSpec::invertible() const {
  const double n = static_cast<double>(dim);
  double norm = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += std::abs(a(i, j));
    norm = std::max(norm, s);
  }
  return std::abs(determinant(a)) > 1e-12 * std::pow(norm, n);
}

void ModelSpec::validate(bool require_invertible) const {
  if (dim <= 0) throw InvalidModel("model '" + name + "': dim must be positive");
  if (phi.dim() != dim) throw InvalidModel("model '" + name + "': phi dimension mismatch");
  if (a.rows() != static_cast<std::size_t>(dim) || a.cols() != static_cast<std::size_t>(dim))
    throw InvalidModel("model '" + name + "': A must be dim x dim");
  const double anorm = max_abs(a);
  const SymmetricEigen eb = symmetric_eigen(b(), false);
  if (eb.values.front() < -1e-12 * anorm)
    throw InvalidModel("model '" + name + "': symmetric part of A is not positive semidefinite");
  if (!require_invertible) return;
  if (!invertible()) throw InvalidModel("model '" + name + "': A is singular");
  // ker B and ker C meet trivially iff B + C^T C is positive definite.
  const Matrix cm = c();
  const SymmetricEigen e = symmetric_eigen(b() + cm.transpose() * cm, false);
  if (e.values.front() <= 1e-12 * std::max(anorm, anorm * anorm))
    throw InvalidModel("model '" + name + "': ker B and ker C intersect");
}

PhiEval eval_phi(const ModelSpec& spec, std::span<const double> x) {
  return {spec.phi.value(x), spec.phi.gradient(x), spec.phi.hessian(x)};
}

ModelSpec kramers_model(std::string name, std::span<const double> v_coefs, double gamma) {
  std::vector<Monomial> terms;
  terms.push_back({{0, 2}, 0.5});
  for (std::size_t k = 0; k < v_coefs.size(); ++k)
    if (v_coefs[k] != 0.0) terms.push_back({{static_cast<int>(k), 0}, v_coefs[k]});
  ModelSpec m;
  m.name = std::move(name);
  m.dim = 2;
  m.phi = Polynomial(2, std::move(terms));
  m.a = Matrix{{0.0, 0.5}, {-0.5, 0.5 * gamma}};
  return m;
}

ModelSpec registry_model(const std::string& name) {
  const Vec dw1{0.0, 0.0, -0.5, 0.0, 0.25};
  if (name == "DW1") return kramers_model("DW1", dw1);
  if (name == "DW2") {
    const Vec dw2{0.0, 0.1, -0.5, 0.0, 0.25};
    return kramers_model("DW2", dw2);
  }
  if (name == "single-well-test") {
    const Vec sw{0.0, 0.0, 0.5};
    return kramers_model("single-well-test", sw);
  }
  if (name == "nu-zero-test") {
    // No transport and no x-diffusion: p0 vanishes on the whole x-axis.
    ModelSpec m = kramers_model("nu-zero-test", dw1);
    m.a = Matrix{{0.0, 0.0}, {0.0, 0.5}};
    return m;
  }
  if (name == "DW1-selfadjoint") {
    ModelSpec m = kramers_model("DW1-selfadjoint", dw1);
    m.a = Matrix::identity(2);
    return m;
  }
  throw InvalidModel("unknown registry model '" + name + "'");
}

std::vector<std::string> registry_names() {
  return {"DW1", "DW2", "single-well-test", "nu-zero-test", "DW1-selfadjoint"};
}

}  // namespace kfp
