#pragma once

#include <span>
#include <string>
#include <vector>

#include "kfp/dense.hpp"

namespace kfp {

struct Monomial {
  std::vector<int> exps;
  double coef = 0.0;
};

/// Real multivariate polynomial with exact first and second derivatives.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(int dim, std::vector<Monomial> terms);

  int dim() const { return dim_; }
  const std::vector<Monomial>& terms() const { return terms_; }
  int degree() const;

  double value(std::span<const double> x) const;
  Vec gradient(std::span<const double> x) const;
  Matrix hessian(std::span<const double> x) const;

 private:
  int dim_ = 0;
  std::vector<Monomial> terms_;
};

struct PhiEval {
  double value = 0.0;
  Vec gradient;
  Matrix hessian;
};

/// The pair (phi, A) defining a Witten complex.
struct ModelSpec {
  std::string name;
  int dim = 0;
  Polynomial phi;
  Matrix a;

  Matrix b() const;  ///< symmetric part of A
  Matrix c() const;  ///< antisymmetric part of A

  /// Throws InvalidModel on shape errors, an indefinite B, or (if required) a
  /// singular A or ker B and ker C meeting nontrivially.
  void validate(bool require_invertible = true) const;
  bool invertible() const;
};

PhiEval eval_phi(const ModelSpec& spec, std::span<const double> x);

/// phi = y^2/2 + V(x) with V given by its coefficients v[k] of x^k, and the
/// kinetic structure matrix A = 1/2 [[0, 1], [-1, gamma]].
ModelSpec kramers_model(std::string name, std::span<const double> v_coefs, double gamma = 1.0);

/// Built-in models: DW1, DW2, single-well-test, nu-zero-test, DW1-selfadjoint.
ModelSpec registry_model(const std::string& name);
std::vector<std::string> registry_names();

}  // namespace kfp
