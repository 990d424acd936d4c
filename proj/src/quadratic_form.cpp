#include "kfp/quadratic_form.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kfp/dense_linalg.hpp"

namespace kfp {

QuadraticForm QuadraticForm::from(const Matrix& m, bool force) {
  if (!m.square()) throw std::invalid_argument("QuadraticForm: matrix not square");
  const double defect = max_abs(m - m.transpose());
  if (!force && defect > 1e-12 * std::max(max_abs(m), 1e-300))
    throw std::invalid_argument("QuadraticForm: matrix not symmetric (defect " +
                                std::to_string(defect) + ")");
  QuadraticForm q;
  q.matrix = symmetric_part(m);
  q.eigenvalues = symmetric_eigen(q.matrix, false).values;
  double scale = 0.0;
  for (double v : q.eigenvalues) scale = std::max(scale, std::abs(v));
  const double tol = 1e-8 * scale;
  for (double v : q.eigenvalues) {
    if (v > tol) {
      ++q.n_pos;
    } else if (v < -tol) {
      ++q.n_neg;
    } else {
      ++q.n_zero;
    }
  }
  return q;
}

double QuadraticForm::operator()(std::span<const double> x) const {
  const Vec mx = matrix.apply(x);
  return dot(x, mx);
}

}  // namespace kfp
