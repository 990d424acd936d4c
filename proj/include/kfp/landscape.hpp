#pragma once

#include <string>
#include <vector>

#include "kfp/model.hpp"
#include "kfp/quadratic_form.hpp"

namespace kfp {

struct Box {
  Vec lo;
  Vec hi;
  static Box cube(int dim, double half_width) {
    return {Vec(dim, -half_width), Vec(dim, half_width)};
  }
  bool contains(std::span<const double> x, double slack = 0.0) const;
};

struct CriticalPoint {
  Vec location;
  double value = 0.0;
  QuadraticForm hessian;
  int index = 0;  ///< number of negative Hessian eigenvalues
};

struct CriticalSearchStats {
  int seeds = 0;
  int dropped_nonconvergent = 0;
};

/// Damped Newton on grad phi from a uniform seed grid, deduplicated at 1e-6,
/// sorted by value and then lexicographically by location.
std::vector<CriticalPoint> find_critical_points(const ModelSpec& spec, const Box& box,
                                                int seeds_per_dim = 8,
                                                CriticalSearchStats* stats = nullptr);
std::vector<CriticalPoint> find_critical_points(const ModelSpec& spec);

struct WellStructure {
  CriticalPoint minus;   ///< U_{-1}, the minimum with the smaller first coordinate
  CriticalPoint plus;    ///< U_{+1}
  CriticalPoint saddle;  ///< U_0
  double s_minus = 0.0;  ///< phi(U_0) - phi(U_{-1})
  double s_plus = 0.0;
  double s_min = 0.0;
  int shallow = 0;  ///< -1 or +1: the well with the larger phi value (ties: +1)

  const CriticalPoint& well(int j) const { return j < 0 ? minus : plus; }
  double action(int j) const { return j < 0 ? s_minus : s_plus; }
};

/// Requires exactly two minima and one index-one saddle; NotDoubleWell otherwise.
WellStructure classify_landscape(const std::vector<CriticalPoint>& points);

}  // namespace kfp
