#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kfp/json_io.hpp"
#include "kfp/landscape.hpp"
#include "kfp/model.hpp"
#include "kfp/quadratic_form.hpp"

namespace kfp {

/// Autonomous vector field with the fixed integration step T0 / 2048.
struct FlowField {
  std::size_t dim = 0;
  std::function<Vec(std::span<const double>)> field;
  double horizon = 10.0;  ///< T0
  /// Optional first integral; flow() checks its drift when set.
  std::function<double(std::span<const double>)> conserved;

  double step() const { return horizon / 2048.0; }
};

/// Transport field 2 C phi'(x) on configuration space; phi is conserved.
FlowField transport_field(const ModelSpec& model, double horizon = 10.0);

/// Hamilton field of p1 = <2 C phi'(x), xi> on phase space (x, xi).
FlowField phase_transport_field(const ModelSpec& model, double horizon = 10.0);

/// RK4 with step <= T0 / 2048. Throws Blowup when |x| passes 1e3.
Vec flow(const FlowField& field, std::span<const double> x0, double t);

/// Trajectory samples x(-T0/2 + k dt), k = 0..2048.
std::vector<Vec> centered_trajectory(const FlowField& field, std::span<const double> x0);

using ScalarField = std::function<double(std::span<const double>)>;

/// (1/T0) * integral over [-T0/2, T0/2] of g(x(t)), Simpson on the RK4 grid.
double time_average(const FlowField& field, const ScalarField& g, std::span<const double> x0);

double f_blend(double t);
double g_blend(double t);
double f_eps(double t, double eps);
/// Odd sawtooth: t + 1/2 on [-1/2, 0), minus its mirror on (0, 1/2], zero outside.
double sawtooth(double t);

/// integral of k(t/T0) f_eps(p0(x(t))) dt over [-T0/2, T0/2].
double psi_eps(const ModelSpec& model, const FlowField& field, std::span<const double> x,
               double eps);

struct Ny17Result {
  QuadraticForm averaged;   ///< time average of diag(HBH, B) along the linearized flow
  double constant = 0.0;    ///< 1 / min eigenvalue
  bool passed = false;
  Vec null_direction;       ///< eigenvector of the smallest eigenvalue
};

Ny17Result evaluate_ny17(const ModelSpec& model, const CriticalPoint& cp, double horizon = 10.0);
/// As evaluate_ny17 but throws HypothesisFails when the averaged form is not definite.
Ny17Result check_ny17(const ModelSpec& model, const CriticalPoint& cp, double horizon = 10.0);

struct SampleAverage {
  Vec x;
  double average = 0.0;          ///< time average of p0
  double measure_fraction = 0.0; ///< fraction of the window with p0 >= threshold
  bool passed = false;
};

struct AverageReport {
  std::string description;
  double horizon = 0.0;
  double threshold = 0.0;
  std::vector<SampleAverage> samples;
  bool passed = false;
  std::size_t worst = 0;         ///< index of the sample with the smallest min(average, fraction)
  double certified_average = 0.0;   ///< min over samples of the average
  double certified_fraction = 0.0;  ///< min over samples of the measure fraction

  json to_json() const;
  std::string to_csv() const;
};

/// Samples within `exclusion` of a critical point are rejected with std::invalid_argument.
/// exclusion <= 0 means exclusion = threshold.
AverageReport evaluate_ny19_ny20(const ModelSpec& model, const std::vector<CriticalPoint>& critical,
                                 const std::vector<Vec>& samples, double horizon, double threshold,
                                 double exclusion = 0.0, std::string description = {});
AverageReport check_ny19_ny20(const ModelSpec& model, const std::vector<CriticalPoint>& critical,
                              const std::vector<Vec>& samples, double horizon, double threshold,
                              double exclusion = 0.0, std::string description = {});

/// Diamond |dx| + |dy| = radius around each critical point (first two coordinates),
/// dropping points closer than `gap` to any critical point.
std::vector<Vec> default_sample_ring(const std::vector<CriticalPoint>& critical, int per_ring = 32,
                                     double radius = 0.5, double gap = 0.1);

/// Cutoff radii of the regularized weight.
struct CutoffRadii {
  double chi_j = 0.3;     ///< phase-space bump around each rho_j
  double chi_x = 0.45;    ///< x-space bump around each x_j, keeps xi-dependence near the wells
  double chi_new = 2.0;   ///< beyond this |x| only f_eps(p0) remains
};

/// p0(x) + p2(x, xi) / <xi>^2
double p_tilde(const ModelSpec& model, std::span<const double> rho);

/// Regularized weight, pointwise <= p_tilde for 0 < eps <= 1.
double p_tilde_eps(const ModelSpec& model, const std::vector<CriticalPoint>& critical,
                   std::span<const double> rho, double eps, const CutoffRadii& radii = {});

/// Two-sided constants for <p_tilde_eps>_T0 against dist^2 (dist <= sqrt eps) and eps beyond.
struct ShapeDiagnostic {
  double eps = 0.0;
  double near_lo = 0.0, near_hi = 0.0;  ///< range of <p~_eps> / dist^2
  double far_lo = 0.0, far_hi = 0.0;    ///< range of <p~_eps> / eps
  int near_samples = 0, far_samples = 0;
};

ShapeDiagnostic shape_diagnostic(const ModelSpec& model, const std::vector<CriticalPoint>& critical,
                                 double eps, double horizon = 10.0, const CutoffRadii& radii = {});

}  // namespace kfp
